"""Balanced subset construction from proxy clusters, plus a uniform baseline.

The balanced sampler draws (nearly) equal quotas from every cluster using a
waterfall allocation: clusters are visited smallest first, each takes
min(size, ceil(remaining / clusters_left)), so undersized clusters hand
their deficit to the larger ones and the target is hit exactly whenever
capacity allows.

Per-cluster draws use independent generator substreams derived from
(seed, cluster id), so the outcome does not depend on cluster visit order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ClusterAssignment, SubsetSelection
from .errors import ParameterError, SamplingError


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SamplingPlan:
    """Sampling request: fraction of the full dataset to keep, and the seed.

    ``fraction`` is taken of the original dataset size including noise;
    noise points themselves are only drawn from when ``include_noise`` is set
    (they then act as one extra pseudo-cluster).
    """

    fraction: float
    seed: int
    include_noise: bool = False

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ParameterError(f"fraction: expected value in (0, 1], got {self.fraction}")
        if self.seed < 0 or self.seed > 0xFFFFFFFFFFFFFFFF:
            raise ParameterError(f"seed: expected unsigned 64-bit integer, got {self.seed}")

    def target_total(self, n_total: int) -> int:
        return round_half_up(self.fraction * n_total)


def _cluster_rng(seed: int, cluster_id: int) -> np.random.Generator:
    # cluster_id + 1 keeps the spawn key non-negative for the noise pseudo-cluster
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(cluster_id + 1,)))


def waterfall_quotas(sizes: dict[int, int], target: int) -> dict[int, int]:
    """Per-cluster take counts; ascending size order, ceil-division quotas."""
    order = sorted(sizes, key=lambda c: (sizes[c], c))
    takes: dict[int, int] = {}
    remaining = target
    clusters_left = len(order)
    for cluster_id in order:
        quota = math.ceil(remaining / clusters_left) if clusters_left else 0
        take = min(sizes[cluster_id], quota)
        takes[cluster_id] = take
        remaining -= take
        clusters_left -= 1
    return takes


def cluster_balanced_sample(assignment: ClusterAssignment, plan: SamplingPlan) -> SubsetSelection:
    """Draw an equal-quota subset across clusters.

    The target size is fraction x full dataset (noise included in the base).
    If the clustered population cannot cover the target, everything clustered
    is selected and the shortfall is flagged on the result.
    """
    n_total = assignment.n
    target = plan.target_total(n_total)

    cluster_ids = list(range(assignment.n_clusters))
    if plan.include_noise and assignment.noise_count > 0:
        cluster_ids.append(-1)
    if not cluster_ids:
        raise SamplingError("no clusters to sample from (K = 0)")

    members = {c: assignment.members(c) for c in cluster_ids}
    sizes = {c: len(members[c]) for c in cluster_ids}
    capacity = sum(sizes.values())
    takes = waterfall_quotas(sizes, min(target, capacity))

    selected_rows: list[int] = []
    # noise pseudo-cluster (-1) is emitted last
    for cluster_id in sorted(cluster_ids, key=lambda c: (c < 0, c)):
        take = takes[cluster_id]
        if take == 0:
            continue
        pool = members[cluster_id]
        if take == len(pool):
            chosen = np.arange(len(pool))
        else:
            rng = _cluster_rng(plan.seed, cluster_id)
            chosen = np.sort(rng.choice(len(pool), size=take, replace=False))
        selected_rows.extend(pool[chosen].tolist())

    selected_ids = tuple(assignment.ids[r] for r in selected_rows)
    return SubsetSelection(
        selected_ids=selected_ids,
        per_cluster_take=takes,
        seed=plan.seed,
        fraction=plan.fraction,
        shortfall=max(0, target - capacity),
    )


def random_sample(ids, plan: SamplingPlan) -> SubsetSelection:
    """Uniform sample without replacement of fraction x n ids, in input order."""
    ids = tuple(ids)
    if not ids:
        raise SamplingError("no ids to sample from")
    target = plan.target_total(len(ids))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=plan.seed))
    chosen = np.sort(rng.choice(len(ids), size=target, replace=False))
    return SubsetSelection(
        selected_ids=tuple(ids[r] for r in chosen),
        per_cluster_take=None,
        seed=plan.seed,
        fraction=plan.fraction,
    )
