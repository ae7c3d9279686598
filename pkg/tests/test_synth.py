import numpy as np
import pytest

from proxygroups.errors import ParameterError
from proxygroups.synth import SynthConfig, generate


class TestGenerate:
    def test_deterministic(self):
        cfg = SynthConfig(n=500, modes=6, dim=8, seed=3)
        a = generate(cfg)
        b = generate(cfg)
        assert a.matrix.ids == b.matrix.ids
        assert np.array_equal(a.matrix.values, b.matrix.values)
        assert np.array_equal(a.modes, b.modes)
        assert a.metadata.records == b.metadata.records

    def test_shapes_and_ids(self):
        ds = generate(SynthConfig(n=200, modes=4, dim=8, seed=0))
        assert ds.matrix.n == 200 and ds.matrix.d == 8
        assert len(set(ds.matrix.ids)) == 200
        assert set(np.unique(ds.modes)) <= set(range(4))

    def test_aggregate_gender_split(self):
        ds = generate(SynthConfig(n=20_000, modes=10, dim=12, gender_split=0.7, seed=1))
        male = sum(1 for r in ds.metadata.records.values() if r.gender == "M")
        assert male / 20_000 == pytest.approx(0.7, abs=0.02)

    def test_modes_are_gender_skewed(self):
        cfg = SynthConfig(n=20_000, modes=10, dim=12, purity=0.9, seed=2)
        ds = generate(cfg)
        half = cfg.modes // 2
        for m in range(cfg.modes):
            rows = np.flatnonzero(ds.modes == m)
            male = sum(
                1 for i in rows if ds.metadata.records[ds.matrix.ids[i]].gender == "M"
            )
            share = male / len(rows)
            if m < half:
                assert share == pytest.approx(0.9, abs=0.05)
            else:
                assert share == pytest.approx(0.1, abs=0.05)

    def test_modes_are_separated(self):
        cfg = SynthConfig(n=2_000, modes=6, dim=8, separation=20.0, seed=4)
        ds = generate(cfg)
        centroids = np.array(
            [ds.matrix.values[ds.modes == m].mean(axis=0) for m in range(6)]
        )
        d2 = ((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        assert np.sqrt(d2.min()) > 10.0

    def test_outcomes_optional(self):
        without = generate(SynthConfig(n=50, modes=4, dim=6, seed=5))
        assert all(r.label is None for r in without.metadata.records.values())
        with_outcomes = generate(SynthConfig(n=50, modes=4, dim=6, seed=5, with_outcomes=True))
        assert all(r.label in (0, 1) for r in with_outcomes.metadata.records.values())
        assert all(r.prediction in (0, 1) for r in with_outcomes.metadata.records.values())

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            SynthConfig(modes=7)  # odd
        with pytest.raises(ParameterError):
            SynthConfig(modes=12, dim=8)  # centers need dim >= modes
        with pytest.raises(ParameterError):
            SynthConfig(gender_split=0.999, purity=0.6)  # unreachable split
