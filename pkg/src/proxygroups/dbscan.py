"""Density clustering of 2-D reduced coordinates.

DBSCAN with the textbook semantics: a core point has at least
``min_samples`` points (itself included) within distance ``eps``; clusters
are maximal density-connected sets of core points plus their border points;
everything else is noise (-1). Labels are assigned deterministically:
cluster k is the k-th cluster whose first core point appears in input
order, and a border point reachable from several clusters belongs to the
cluster that claims it first in scan order.

Fixed-radius neighbor queries use a uniform grid with cell width eps
(9-cell lookups), which is the right index for a 2-D plane and easy to
check against a quadratic oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ClusterAssignment, MetadataTable, ReducedCoordinates
from .errors import ParameterError

DEFAULT_AGE_BIN_EDGES = (0, 15, 30, 45, 60, 75, 90)


@dataclass(frozen=True)
class ClusterParams:
    eps: float
    min_samples: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"eps: expected > 0, got {self.eps}")
        if self.min_samples < 1:
            raise ParameterError(f"min_samples: expected >= 1, got {self.min_samples}")


class _Grid:
    """Uniform grid over the bounding box; cells are eps x eps."""

    def __init__(self, points: np.ndarray, eps: float):
        self.points = points
        self.eps = eps
        self.eps2 = eps * eps
        origin = points.min(axis=0)
        cells = np.floor((points - origin) / eps).astype(np.int64)
        self.cell_of = cells
        buckets: dict[tuple[int, int], list[int]] = {}
        for idx, (cx, cy) in enumerate(cells):
            buckets.setdefault((int(cx), int(cy)), []).append(idx)
        self.buckets = {k: np.array(v, dtype=np.int64) for k, v in buckets.items()}

    def neighbors(self, idx: int) -> np.ndarray:
        """Indices within eps of point idx (inclusive, self included), ascending."""
        cx, cy = self.cell_of[idx]
        candidates = [
            self.buckets[key]
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
            if (key := (int(cx + dx), int(cy + dy))) in self.buckets
        ]
        cand = np.concatenate(candidates)
        delta = self.points[cand] - self.points[idx]
        mask = (delta * delta).sum(axis=1) <= self.eps2
        return np.sort(cand[mask])


def dbscan_labels(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Label 2-D points; returns int64 labels with -1 for noise."""
    ClusterParams(eps=eps, min_samples=min_samples)
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)

    UNVISITED = -2
    labels = np.full(n, UNVISITED, dtype=np.int64)
    grid = _Grid(points, eps)
    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        seeds = grid.neighbors(i)
        if len(seeds) < min_samples:
            labels[i] = -1
            continue
        labels[i] = cluster
        queue = deque(int(j) for j in seeds if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == -1:  # border point previously deemed non-core
                labels[j] = cluster
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            reach = grid.neighbors(j)
            if len(reach) >= min_samples:
                queue.extend(int(r) for r in reach if labels[r] == UNVISITED or labels[r] == -1)
        cluster += 1
    return labels


def dbscan(coords: ReducedCoordinates, params: ClusterParams) -> ClusterAssignment:
    labels = dbscan_labels(coords.coords, params.eps, params.min_samples)
    return ClusterAssignment(
        ids=coords.ids, labels=labels, eps=params.eps, min_samples=params.min_samples
    )


def core_point_mask(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Boolean mask of core points (>= min_samples neighbors within eps, self included)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask
    grid = _Grid(points, eps)
    for i in range(n):
        mask[i] = len(grid.neighbors(i)) >= min_samples
    return mask


# ---------------------------------------------------------------------------
# Parameter tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TuneEntry:
    eps: float
    min_samples: int
    k: int
    noise: int


@dataclass(frozen=True)
class TuneResult:
    """Grid-search table plus the chosen entry (None when no K lands in band)."""

    entries: tuple[TuneEntry, ...]
    chosen: TuneEntry | None
    k_min: int
    k_max: int

    @property
    def feasible(self) -> bool:
        return self.chosen is not None


def tune_dbscan(
    coords: ReducedCoordinates,
    eps_grid: Sequence[float],
    min_samples_grid: Sequence[int],
    k_min: int,
    k_max: int,
) -> TuneResult:
    """Grid search for a cluster count inside [k_min, k_max] with minimal noise.

    Ties prefer larger eps, then larger min_samples (coarser, more stable
    clusterings). Infeasible grids still return the full table.
    """
    if not eps_grid or not min_samples_grid:
        raise ParameterError("eps_grid/min_samples_grid: grids must be non-empty")
    if k_min > k_max:
        raise ParameterError(f"k_min: {k_min} exceeds k_max {k_max}")

    entries: list[TuneEntry] = []
    for eps in eps_grid:
        for min_samples in min_samples_grid:
            labels = dbscan_labels(coords.coords, eps, min_samples)
            k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
            noise = int(np.sum(labels == -1))
            entries.append(TuneEntry(eps=float(eps), min_samples=int(min_samples), k=k, noise=noise))

    in_band = [e for e in entries if k_min <= e.k <= k_max]
    chosen = min(in_band, key=lambda e: (e.noise, -e.eps, -e.min_samples)) if in_band else None
    return TuneResult(entries=tuple(entries), chosen=chosen, k_min=k_min, k_max=k_max)


# ---------------------------------------------------------------------------
# Composition reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterComposition:
    cluster_id: int
    size: int
    known_gender: int
    female_proportion: float | None
    male_proportion: float | None
    missing_gender: int
    age_histogram: tuple[int, ...]
    missing_age: int


def cluster_composition(
    assignment: ClusterAssignment,
    table: MetadataTable,
    age_bin_edges: Sequence[int] = DEFAULT_AGE_BIN_EDGES,
) -> list[ClusterComposition]:
    """Size, gender shares, and age histogram per cluster (noise row included
    when noise exists). Proportions are absent for clusters with no known
    gender; the last age bin is open-ended (>= last edge)."""
    edges = list(age_bin_edges)
    if edges != sorted(edges) or len(set(edges)) != len(edges):
        raise ParameterError(f"age_bin_edges: must be strictly ascending, got {edges}")

    cluster_ids = list(range(assignment.n_clusters))
    if assignment.noise_count > 0:
        cluster_ids.append(-1)

    out: list[ClusterComposition] = []
    for cluster_id in cluster_ids:
        rows = assignment.members(cluster_id)
        n_f = n_m = 0
        missing_gender = missing_age = 0
        hist = [0] * len(edges)
        for r in rows:
            record = table.get(assignment.ids[r])
            gender = record.gender if record else None
            age = record.age if record else None
            if gender == "F":
                n_f += 1
            elif gender == "M":
                n_m += 1
            else:
                missing_gender += 1
            if age is None:
                missing_age += 1
            else:
                bin_idx = int(np.searchsorted(edges, age, side="right")) - 1
                hist[max(bin_idx, 0)] += 1
        known = n_f + n_m
        out.append(
            ClusterComposition(
                cluster_id=cluster_id,
                size=len(rows),
                known_gender=known,
                female_proportion=n_f / known if known else None,
                male_proportion=n_m / known if known else None,
                missing_gender=missing_gender,
                age_histogram=tuple(hist),
                missing_age=missing_age,
            )
        )
    return out
