import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from proxygroups.data import ClusterAssignment, MetadataTable, ReducedCoordinates, SampleRecord
from proxygroups.dbscan import (
    ClusterParams,
    cluster_composition,
    core_point_mask,
    dbscan,
    dbscan_labels,
    tune_dbscan,
)
from proxygroups.errors import ParameterError


def coords_of(points):
    points = np.asarray(points, dtype=float)
    return ReducedCoordinates(ids=tuple(f"p{i}" for i in range(len(points))), coords=points)


def check_against_oracle(points, eps, min_samples):
    labels = dbscan_labels(points, eps, min_samples)
    oracle_labels, core, border_adj = oracles.brute_force_dbscan(points, eps, min_samples)
    anchor = np.flatnonzero(core).tolist() + [
        i for i in range(len(points)) if oracle_labels[i] == -1 and i not in border_adj
    ]
    assert oracles.partitions_match_over(labels, oracle_labels, anchor)
    # noise sets identical
    assert np.array_equal(labels == -1, oracle_labels == -1)
    # border points attach to one of their density-reachable clusters
    label_map = {}
    for i in np.flatnonzero(core):
        label_map[int(labels[i])] = int(oracle_labels[i])
    for i, adjacent in border_adj.items():
        assert label_map[int(labels[i])] in adjacent
    return labels


class TestDbscan:
    def test_empty(self):
        labels = dbscan_labels(np.empty((0, 2)), eps=1.0, min_samples=3)
        assert labels.shape == (0,)

    def test_min_samples_points_within_eps(self):
        rng = np.random.default_rng(0)
        points = rng.uniform(0, 0.1, size=(5, 2))
        labels = dbscan_labels(points, eps=1.0, min_samples=5)
        assert np.all(labels == 0)

    def test_uniform_points_match_oracle(self):
        rng = np.random.default_rng(7)
        points = rng.uniform(0, 1, size=(500, 2))
        check_against_oracle(points, eps=0.05, min_samples=5)

    def test_labels_contiguous_and_scan_ordered(self):
        # two far-apart dense groups; the group whose point appears first gets label 0
        a = np.zeros((5, 2))
        b = np.full((5, 2), 100.0)
        points = np.vstack([b[:1], a, b[1:]])
        labels = dbscan_labels(points, eps=1.0, min_samples=3)
        assert labels[0] == 0  # first core point encountered belongs to the far group
        assert set(labels.tolist()) == {0, 1}

    def test_border_point_goes_to_first_claiming_cluster(self):
        # x=2.0 is non-core (3 neighbors < 4) but within eps of a core in each
        # of the two chains; scan order claims it for the left cluster
        xs = [0.0, 0.4, 0.8, 1.2, 2.0, 2.8, 3.2, 3.6, 4.0]
        points = np.column_stack([xs, np.zeros(len(xs))])
        labels = dbscan_labels(points, eps=1.0, min_samples=4)
        core = core_point_mask(points, eps=1.0, min_samples=4)
        assert not core[4]
        assert labels[4] == labels[1] == 0  # claimed by the left cluster
        assert labels[5] == labels[6] == 1
        assert labels[0] == 0  # promoted border, not noise

    def test_every_member_within_eps_of_core(self):
        rng = np.random.default_rng(11)
        points = rng.uniform(0, 1, size=(300, 2))
        eps, min_samples = 0.07, 4
        labels = dbscan_labels(points, eps, min_samples)
        core = core_point_mask(points, eps, min_samples)
        for k in range(labels.max() + 1):
            members = np.flatnonzero(labels == k)
            cores_k = members[core[members]]
            assert len(cores_k) > 0
            d2 = ((points[members][:, None, :] - points[cores_k][None, :, :]) ** 2).sum(axis=2)
            assert np.all(d2.min(axis=1) <= eps * eps + 1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(10, 120))
    def test_partition_stable_under_permutation(self, seed, n):
        rng = np.random.default_rng(seed)
        points = rng.uniform(0, 1, size=(n, 2))
        eps, min_samples = 0.15, 4
        labels = dbscan_labels(points, eps, min_samples)
        perm = rng.permutation(n)
        labels_perm = dbscan_labels(points[perm], eps, min_samples)
        # compare in original order
        back = np.empty(n, dtype=int)
        back[perm] = labels_perm
        core = core_point_mask(points, eps, min_samples)
        assert oracles.partitions_match_over(labels, back, np.flatnonzero(core))
        assert np.array_equal(labels == -1, back == -1)
        # border points may change cluster, but must attach to a cluster with
        # a core point within eps
        for i in np.flatnonzero(~core & (back >= 0)):
            same = np.flatnonzero(core & (back == back[i]))
            d2 = ((points[same] - points[i]) ** 2).sum(axis=1)
            assert d2.min() <= eps * eps + 1e-12

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_noise_monotone_in_eps(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(0, 1, size=(150, 2))
        noise_counts = [
            int((dbscan_labels(points, eps, 4) == -1).sum()) for eps in (0.03, 0.06, 0.12, 0.24)
        ]
        assert noise_counts == sorted(noise_counts, reverse=True)

    def test_wrapper_records_params(self):
        points = np.zeros((4, 2))
        a = dbscan(coords_of(points), ClusterParams(eps=1.0, min_samples=2))
        assert a.eps == 1.0 and a.min_samples == 2
        assert a.n_clusters == 1

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            ClusterParams(eps=0.0, min_samples=2)
        with pytest.raises(ParameterError):
            ClusterParams(eps=1.0, min_samples=0)


def twenty_blobs(seed=5, per_blob=40):
    rng = np.random.default_rng(seed)
    angles = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    centers = 50.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    points = np.vstack([c + rng.standard_normal((per_blob, 2)) for c in centers])
    return points


class TestTune:
    def test_singleton_grid_in_band(self):
        points = twenty_blobs()
        result = tune_dbscan(coords_of(points), [2.0], [5], k_min=15, k_max=25)
        assert result.feasible
        assert result.chosen.eps == 2.0 and result.chosen.min_samples == 5

    def test_twenty_blob_grid(self):
        points = twenty_blobs()
        coords = coords_of(points)
        eps_grid = [0.5, 2.0, 5.0, 40.0]
        ms_grid = [3, 10]
        result = tune_dbscan(coords, eps_grid, ms_grid, k_min=15, k_max=25)
        assert result.feasible
        assert 15 <= result.chosen.k <= 25
        assert len(result.entries) == len(eps_grid) * len(ms_grid)
        # re-evaluate externally: chosen noise is minimal over in-band entries
        noises = []
        for eps in eps_grid:
            for ms in ms_grid:
                labels = dbscan_labels(points, eps, ms)
                k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
                if 15 <= k <= 25:
                    noises.append(int((labels == -1).sum()))
        assert result.chosen.noise == min(noises)

    def test_tie_breaks_prefer_larger_eps(self):
        points = twenty_blobs()
        result = tune_dbscan(coords_of(points), [1.5, 2.0, 2.5], [3], k_min=15, k_max=25)
        in_band = [e for e in result.entries if 15 <= e.k <= 25 and e.noise == result.chosen.noise]
        assert result.chosen.eps == max(e.eps for e in in_band)

    def test_all_noise_grid_infeasible(self):
        points = twenty_blobs()
        result = tune_dbscan(coords_of(points), [1e-6], [5], k_min=15, k_max=25)
        assert not result.feasible
        assert all(e.k == 0 for e in result.entries)

    def test_empty_grid_rejected(self):
        with pytest.raises(ParameterError):
            tune_dbscan(coords_of(np.zeros((5, 2))), [], [3], 1, 2)


class TestComposition:
    def _assignment(self, labels):
        return ClusterAssignment(
            ids=tuple(f"p{i}" for i in range(len(labels))), labels=np.array(labels)
        )

    def test_counting(self):
        labels = [0] * 100
        genders = ["F"] * 2 + ["M"] * 98
        table = MetadataTable(
            records={f"p{i}": SampleRecord(gender=genders[i], age=50) for i in range(100)}
        )
        comp = cluster_composition(self._assignment(labels), table)
        assert len(comp) == 1
        assert comp[0].female_proportion == pytest.approx(0.02)
        assert comp[0].size == 100

    def test_all_gender_missing(self):
        labels = [0, 0, -1]
        table = MetadataTable(records={f"p{i}": SampleRecord(age=40) for i in range(3)})
        comp = cluster_composition(self._assignment(labels), table)
        by_id = {c.cluster_id: c for c in comp}
        assert by_id[0].female_proportion is None
        assert by_id[0].size == 2
        assert by_id[-1].size == 1

    def test_age_histogram_bins(self):
        labels = [0, 0, 0, 0]
        ages = [0, 15, 89, 95]
        table = MetadataTable(
            records={f"p{i}": SampleRecord(age=ages[i]) for i in range(4)}
        )
        comp = cluster_composition(self._assignment(labels), table)
        # edges 0,15,30,45,60,75,90: ages 0->bin0, 15->bin1, 89->bin5, 95->bin6
        assert comp[0].age_histogram == (1, 1, 0, 0, 0, 1, 1)

    def test_custom_bins_and_missing(self):
        labels = [0, 0]
        table = MetadataTable(
            records={"p0": SampleRecord(age=10), "p1": SampleRecord()}
        )
        comp = cluster_composition(self._assignment(labels), table, age_bin_edges=(0, 50))
        assert comp[0].age_histogram == (1, 0)
        assert comp[0].missing_age == 1
