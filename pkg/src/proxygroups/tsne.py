"""t-SNE reduction of embedding matrices to the 2-D plane.

Two execution regimes share one parameter set:

* theta == 0: exact. Dense affinities over all pairs, exact gradient.
* theta > 0: Barnes-Hut. Conditional distributions are restricted to the
  min(n-1, floor(3 * perplexity)) exact nearest neighbors per point, and
  the repulsive force field is approximated with a quadtree whose cells
  are summarized when cell_width / distance < theta.

Per-point Gaussian bandwidths are calibrated so that exp(entropy) of the
conditional distribution equals the requested perplexity (entropy in nats),
by bisection on sigma with bracket expansion first. Runs are deterministic
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import quadtree
from .data import EmbeddingMatrix, ReducedCoordinates
from .errors import ParameterError, ValidationError

_MIN_GAIN = 0.01
_EXPANSION_ITERS = 50


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    learning_rate: float | None = None  # None: max(n / 12, 50)
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    theta: float = 0.5
    seed: int = 0
    init: str = "pca"

    def __post_init__(self):
        if not self.perplexity > 1:
            raise ParameterError(f"perplexity: expected > 1, got {self.perplexity}")
        if self.iterations < 1:
            raise ParameterError(f"iterations: expected >= 1, got {self.iterations}")
        if not self.early_exaggeration_factor >= 1:
            raise ParameterError(
                f"early_exaggeration_factor: expected >= 1, got {self.early_exaggeration_factor}"
            )
        if not (0 <= self.early_exaggeration_iters <= self.iterations):
            raise ParameterError(
                "early_exaggeration_iters: expected in [0, iterations], got "
                f"{self.early_exaggeration_iters} (iterations={self.iterations})"
            )
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ParameterError(f"learning_rate: expected > 0, got {self.learning_rate}")
        for name in ("momentum_initial", "momentum_final"):
            m = getattr(self, name)
            if not (0.0 <= m < 1.0):
                raise ParameterError(f"{name}: expected in [0, 1), got {m}")
        if self.momentum_switch_iter < 0:
            raise ParameterError(
                f"momentum_switch_iter: expected >= 0, got {self.momentum_switch_iter}"
            )
        if not (0.0 <= self.theta <= 1.0):
            raise ParameterError(f"theta: expected in [0, 1], got {self.theta}")
        if self.seed < 0 or self.seed > 0xFFFFFFFFFFFFFFFF:
            raise ParameterError(f"seed: expected unsigned 64-bit integer, got {self.seed}")
        if self.init not in ("pca", "random"):
            raise ParameterError(f"init: expected 'pca' or 'random', got {self.init!r}")

    def check_n(self, n: int) -> None:
        if not 3 * self.perplexity < n:
            raise ParameterError(
                f"perplexity: must satisfy 3 * perplexity < n (perplexity={self.perplexity}, n={n})"
            )

    def resolved_learning_rate(self, n: int) -> float:
        return self.learning_rate if self.learning_rate is not None else max(n / 12.0, 50.0)


# ---------------------------------------------------------------------------
# Bandwidth calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    sigma: float
    probs: np.ndarray
    converged: bool


def _row_perplexities(d2: np.ndarray, valid: np.ndarray, sigma: np.ndarray):
    """exp(entropy) and conditional probabilities per row, for given sigmas."""
    a = np.where(valid, -d2 / (2.0 * sigma[:, None] ** 2), -np.inf)
    a_max = a.max(axis=1, keepdims=True)
    w = np.exp(a - a_max)
    s = w.sum(axis=1)
    p = w / s[:, None]
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    entropy = -plogp.sum(axis=1)
    return np.exp(entropy), p


def _calibrate_batch(
    d2: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 200
):
    """Vectorized per-row sigma bisection.

    d2 holds squared distances, one row per point. Zero distances (exact
    duplicates) get zero conditional weight unless a whole row is zero, in
    which case that row falls back to the uniform distribution with the
    smallest positive bracket value as sigma.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    m, k = d2.shape
    valid = d2 > 0.0
    degenerate = ~valid.any(axis=1)

    sigma = np.ones(m, dtype=np.float64)
    probs = np.zeros((m, k), dtype=np.float64)
    converged = np.zeros(m, dtype=bool)
    best_err = np.full(m, np.inf)
    best_sigma = np.ones(m, dtype=np.float64)

    if degenerate.any():
        probs[degenerate] = 1.0 / k
        sigma[degenerate] = np.finfo(np.float64).tiny
        converged[degenerate] = True

    active = ~degenerate
    if active.any():
        rows = np.flatnonzero(active)
        rd2 = d2[rows]
        rvalid = valid[rows]
        # scale-aware start: mean positive distance
        start = np.sqrt(np.where(rvalid, rd2, 0.0).sum(axis=1) / rvalid.sum(axis=1))
        lo = start.copy()
        hi = start.copy()
        have_lo = np.zeros(len(rows), dtype=bool)
        have_hi = np.zeros(len(rows), dtype=bool)
        done = np.zeros(len(rows), dtype=bool)
        r_sigma = start.copy()
        r_probs = np.zeros_like(rd2)
        r_best_err = np.full(len(rows), np.inf)
        r_best_sigma = start.copy()
        iters_used = 0

        def record(idx_mask, f, p, s):
            err = np.abs(f - perplexity)
            improved = idx_mask & (err < r_best_err)
            r_best_err[improved] = err[improved]
            r_best_sigma[improved] = s[improved]
            hit = idx_mask & (err <= tol)
            newly = hit & ~done
            r_sigma[newly] = s[newly]
            r_probs[newly] = p[newly]
            done[newly] = True

        # bracket expansion: halve lo while its perplexity is high,
        # double hi while its perplexity is low
        for _ in range(_EXPANSION_ITERS):
            pending = ~done & ~(have_lo & have_hi)
            if not pending.any():
                break
            iters_used += 1
            f_lo, p_lo = _row_perplexities(rd2, rvalid, lo)
            record(pending & ~have_lo, f_lo, p_lo, lo)
            too_high = pending & ~done & ~have_lo & (f_lo > perplexity)
            have_lo |= pending & ~too_high
            lo[too_high] /= 2.0
            f_hi, p_hi = _row_perplexities(rd2, rvalid, hi)
            record(pending & ~have_hi, f_hi, p_hi, hi)
            too_low = pending & ~done & ~have_hi & (f_hi < perplexity)
            have_hi |= pending & ~too_low
            hi[too_low] *= 2.0

        for _ in range(max(0, max_iter - iters_used)):
            pending = ~done
            if not pending.any():
                break
            mid = 0.5 * (lo + hi)
            f_mid, p_mid = _row_perplexities(rd2, rvalid, mid)
            record(pending, f_mid, p_mid, mid)
            pending = ~done
            go_up = pending & (f_mid < perplexity)
            lo[go_up] = mid[go_up]
            hi[pending & ~go_up] = mid[pending & ~go_up]

        if not done.all():
            # best effort for rows that never hit the tolerance
            rest = ~done
            f, p = _row_perplexities(rd2, rvalid, r_best_sigma)
            r_sigma[rest] = r_best_sigma[rest]
            r_probs[rest] = p[rest]

        sigma[rows] = r_sigma
        probs[rows] = r_probs
        converged[rows] = done
        best_err[rows] = r_best_err
        best_sigma[rows] = r_best_sigma

    return sigma, probs, converged


def calibrate_bandwidth(
    distances: Sequence[float], perplexity: float, tol: float = 1e-5, max_iter: int = 200
) -> CalibrationResult:
    """Calibrate one point's Gaussian bandwidth to the requested perplexity.

    Probabilities are proportional to exp(-d^2 / (2 sigma^2)); sigma is found
    by bisection (bracket expansion first) so that exp(entropy) matches the
    perplexity within ``tol``. Non-convergence returns the best sigma seen
    with ``converged=False``.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise ParameterError(f"distances: expected >= 2 values, got shape {d.shape}")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ParameterError("distances: values must be finite and non-negative")
    if not perplexity >= 1:
        raise ParameterError(f"perplexity: expected >= 1, got {perplexity}")
    sigma, probs, converged = _calibrate_batch(
        d[None, :] ** 2, perplexity, tol=tol, max_iter=max_iter
    )
    return CalibrationResult(sigma=float(sigma[0]), probs=probs[0], converged=bool(converged[0]))


# ---------------------------------------------------------------------------
# Affinities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric joint distribution p_ij (total mass 1, zero diagonal).

    Dense storage for the exact regime, CSR for the neighbor-restricted one.
    """

    n: int
    sigmas: np.ndarray
    converged: np.ndarray
    dense: np.ndarray | None = None
    indptr: np.ndarray | None = None
    indices: np.ndarray | None = None
    data: np.ndarray | None = None

    def __post_init__(self):
        has_dense = self.dense is not None
        has_sparse = self.indptr is not None and self.indices is not None and self.data is not None
        if has_dense == has_sparse:
            raise ValidationError("affinities need exactly one of dense or CSR storage")
        total = self.total()
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"affinities: total mass {total!r} not within 1e-9 of 1")

    @property
    def is_sparse(self) -> bool:
        return self.dense is None

    def total(self) -> float:
        if self.dense is not None:
            return float(self.dense.sum())
        return float(self.data.sum())

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            out[i, self.indices[self.indptr[i] : self.indptr[i + 1]]] = self.data[
                self.indptr[i] : self.indptr[i + 1]
            ]
        return out

    def to_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.is_sparse:
            return self.indptr, self.indices, self.data
        rows, cols = np.nonzero(self.dense)
        data = self.dense[rows, cols]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, cols.astype(np.int64), data.astype(np.float64)

    def support_sum_plogp(self) -> float:
        data = self.dense.ravel() if self.dense is not None else self.data
        pos = data[data > 0]
        return float(np.sum(pos * np.log(pos)))


def _pairwise_sq_dists(values: np.ndarray, block: np.ndarray | None = None) -> np.ndarray:
    a = values if block is None else block
    sq_a = (a * a).sum(axis=1)
    sq_b = (values * values).sum(axis=1)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ values.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def exact_knn(values: np.ndarray, k: int, block_size: int = 512):
    """k nearest neighbors per row by blocked brute force (ties broken by index)."""
    n = values.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    d2 = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        bd2 = _pairwise_sq_dists(values, values[start:stop])
        bd2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(bd2, k - 1, axis=1)[:, :k]
        part_d2 = np.take_along_axis(bd2, part, axis=1)
        order = np.lexsort((part, part_d2), axis=1)
        idx[start:stop] = np.take_along_axis(part, order, axis=1)
        d2[start:stop] = np.take_along_axis(part_d2, order, axis=1)
    return idx, d2


def compute_affinities(matrix: EmbeddingMatrix | np.ndarray, params: TsneParams) -> AffinityMatrix:
    """Symmetrized joint affinities p_ij = (p_j|i + p_i|j) / (2n).

    theta == 0 calibrates against every other point; theta > 0 restricts
    each conditional to the floor(3 * perplexity) exact nearest neighbors.
    """
    values = matrix.values if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix, dtype=np.float64)
    n = values.shape[0]
    if n < 4:
        raise ParameterError(f"n: need at least 4 points, got {n}")

    if params.theta == 0.0:
        d2 = _pairwise_sq_dists(values)
        off = ~np.eye(n, dtype=bool)
        d2_off = d2[off].reshape(n, n - 1)
        sigmas, cond, converged = _calibrate_batch(d2_off, params.perplexity)
        full = np.zeros((n, n), dtype=np.float64)
        full[off] = cond.ravel()
        joint = (full + full.T) / (2.0 * n)
        return AffinityMatrix(n=n, sigmas=sigmas, converged=converged, dense=joint)

    k = min(n - 1, int(np.floor(3.0 * params.perplexity)))
    nbr, nd2 = exact_knn(values, k)
    sigmas, cond, converged = _calibrate_batch(nd2, params.perplexity)

    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = nbr.ravel()
    vals = cond.ravel() / (2.0 * n)
    # stack both directions, then coalesce duplicate (i, j) pairs
    all_rows = np.concatenate([rows, cols])
    all_cols = np.concatenate([cols, rows])
    all_vals = np.concatenate([vals, vals])
    keep = all_vals > 0
    all_rows, all_cols, all_vals = all_rows[keep], all_cols[keep], all_vals[keep]
    code = all_rows * n + all_cols
    uniq, inverse = np.unique(code, return_inverse=True)
    summed = np.bincount(inverse, weights=all_vals, minlength=len(uniq))
    out_rows = (uniq // n).astype(np.int64)
    out_cols = (uniq % n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, out_rows + 1, 1)
    indptr = np.cumsum(indptr)
    return AffinityMatrix(
        n=n,
        sigmas=sigmas,
        converged=converged,
        indptr=indptr,
        indices=out_cols,
        data=summed.astype(np.float64),
    )


# ---------------------------------------------------------------------------
# Objective and gradients
# ---------------------------------------------------------------------------

def _student_weights(y: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = _pairwise_sq_dists(y)
    w = 1.0 / (1.0 + d2)
    np.fill_diagonal(w, 0.0)
    return w, float(w.sum())


def _as_coords_array(y) -> np.ndarray:
    if isinstance(y, ReducedCoordinates):
        return y.coords
    return np.asarray(y, dtype=np.float64)


def kl_objective(aff: AffinityMatrix, y) -> float:
    """Exact KL(P || Q) with Student-t low-dimensional similarities."""
    y = _as_coords_array(y)
    w, z = _student_weights(y)
    if aff.dense is not None:
        p = aff.dense
        mask = p > 0
        return float(np.sum(p[mask] * np.log(p[mask] * z / w[mask])))
    indptr, indices, data = aff.to_csr()
    rows = np.repeat(np.arange(aff.n), np.diff(indptr))
    wij = w[rows, indices]
    pos = data > 0
    return float(np.sum(data[pos] * np.log(data[pos] * z / wij[pos])))


def gradient(aff: AffinityMatrix, y) -> np.ndarray:
    """Exact KL gradient: 4 * sum_j (p_ij - q_ij) w_ij (y_i - y_j)."""
    y = _as_coords_array(y)
    w, z = _student_weights(y)
    if aff.dense is not None:
        m = (aff.dense - w / z) * w
        return 4.0 * (m.sum(axis=1)[:, None] * y - m @ y)
    indptr, indices, data = aff.to_csr()
    rows = np.repeat(np.arange(aff.n), np.diff(indptr))
    wij = w[rows, indices]
    pw = data * wij
    attr = np.zeros_like(y)
    for dim in range(2):
        contrib = pw * (y[rows, dim] - y[indices, dim])
        attr[:, dim] = np.bincount(rows, weights=contrib, minlength=aff.n)
    r = w * w / z
    rep = r.sum(axis=1)[:, None] * y - r @ y
    return 4.0 * (attr - rep)


def gradient_bh(aff: AffinityMatrix, y, theta: float) -> np.ndarray:
    """Barnes-Hut KL gradient (quadtree repulsion, sparse attraction)."""
    y = np.ascontiguousarray(_as_coords_array(y), dtype=np.float64)
    indptr, indices, data = aff.to_csr()
    grad, _z, _plogw = quadtree.barnes_hut_gradient(y, indptr, indices, data, theta)
    return grad


# ---------------------------------------------------------------------------
# Initialization and the main loop
# ---------------------------------------------------------------------------

def _pca2(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean(axis=0)
    n, d = centered.shape
    if d <= 256:
        cov = centered.T @ centered
        eigvals, eigvecs = np.linalg.eigh(cov)
        comps = eigvecs[:, ::-1][:, :2]
    else:
        # block power iteration; fixed start keeps the init seed-independent
        rng = np.random.default_rng(0x5EED)
        comps = rng.standard_normal((d, 2))
        comps, _ = np.linalg.qr(comps)
        for _ in range(100):
            comps = centered.T @ (centered @ comps)
            comps, _ = np.linalg.qr(comps)
    proj = centered @ comps
    if proj.shape[1] < 2:
        proj = np.column_stack([proj, np.zeros(n)])
    # deterministic sign: largest-magnitude coordinate positive
    for dim in range(2):
        col = proj[:, dim]
        if col.size and col[np.argmax(np.abs(col))] < 0:
            proj[:, dim] = -col
    return proj


def _initial_embedding(values: np.ndarray, params: TsneParams) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed))
    if params.init == "random":
        return 1e-4 * rng.standard_normal((values.shape[0], 2))
    proj = _pca2(values)
    scale = proj[:, 0].std()
    if scale == 0.0:
        return 1e-4 * rng.standard_normal((values.shape[0], 2))
    return proj / scale * 1e-4


@dataclass(frozen=True)
class TsneResult:
    coords: ReducedCoordinates
    kl_trace: np.ndarray
    params: TsneParams


def run_tsne(matrix: EmbeddingMatrix, params: TsneParams | None = None) -> TsneResult:
    """Gradient descent with momentum, adaptive gains, and early exaggeration.

    Deterministic for a fixed seed. ``kl_trace[t]`` is the objective of the
    configuration entering iteration t, always measured against the
    unexaggerated affinities; in the Barnes-Hut regime the trace uses the
    tree-estimated normalizer and is restricted to the affinity support.
    """
    params = params or TsneParams()
    n = matrix.n
    params.check_n(n)

    aff = compute_affinities(matrix, params)
    lr = params.resolved_learning_rate(n)
    y = _initial_embedding(matrix.values, params)
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    plogp = aff.support_sum_plogp()

    exaggeration = params.early_exaggeration_factor
    if aff.is_sparse:
        indptr, indices, base_data = aff.to_csr()
        live_data = base_data * exaggeration
    else:
        base_dense = aff.dense
        live_dense = base_dense * exaggeration

    trace = np.empty(params.iterations, dtype=np.float64)
    for it in range(params.iterations):
        if it == params.early_exaggeration_iters:
            exaggeration = 1.0
            if aff.is_sparse:
                live_data = base_data
            else:
                live_dense = base_dense

        if aff.is_sparse:
            y = np.ascontiguousarray(y)
            grad, z_total, plogw = quadtree.barnes_hut_gradient(
                y, indptr, indices, live_data, params.theta
            )
            trace[it] = plogp - plogw / exaggeration + np.log(z_total)
        else:
            w, z = _student_weights(y)
            m = (live_dense - w / z) * w
            grad = 4.0 * (m.sum(axis=1)[:, None] * y - m @ y)
            mask = base_dense > 0
            trace[it] = float(
                np.sum(base_dense[mask] * np.log(base_dense[mask] * z / w[mask]))
            )

        same_sign = (grad > 0) == (velocity > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, _MIN_GAIN, out=gains)
        momentum = (
            params.momentum_initial
            if it < params.momentum_switch_iter
            else params.momentum_final
        )
        velocity = momentum * velocity - lr * gains * grad
        y = y + velocity
        y -= y.mean(axis=0)

    if not np.all(np.isfinite(y)):
        raise ValidationError(
            "optimization diverged to non-finite coordinates; lower learning_rate"
        )
    coords = ReducedCoordinates(ids=matrix.ids, coords=y)
    return TsneResult(coords=coords, kl_trace=trace, params=params)
