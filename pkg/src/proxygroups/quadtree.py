"""Array-based quadtree and force kernels for the 2-D embedding plane.

Everything here is numba-compiled and operates on flat arrays so the hot
per-iteration work (tree build, repulsive traversal, attractive pass over
the sparse affinity support) stays out of the interpreter. Single-threaded
on purpose: accumulation order is fixed, so runs are bit-reproducible.

Tree layout: node 0 is the root. Per node we track the cell center and
half-width, the number of contained points, the running position sum (for
the center of mass), and four child slots (-1 = absent). A node holding a
single bucket of coincident points keeps point_index >= 0; internal nodes
have point_index == -2. Points closer than the cell resolution at
MAX_DEPTH share a bucket leaf.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

MAX_DEPTH = 48

_EMPTY = -1  # child slot / leaf marker: nothing here
_INTERNAL = -2  # point_index value for internal nodes


@njit(cache=True)
def _grow_int2d(arr, capacity, fill):
    out = np.full((capacity, arr.shape[1]), fill, dtype=np.int64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_int1d(arr, capacity, fill):
    out = np.full(capacity, fill, dtype=np.int64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_f2d(arr, capacity):
    out = np.zeros((capacity, arr.shape[1]), dtype=np.float64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_f1d(arr, capacity):
    out = np.zeros(capacity, dtype=np.float64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def build(pos):
    """Build a quadtree over pos (n, 2); returns flat node arrays.

    Returns (children, count, mass_center, center, half, n_nodes).
    """
    n = pos.shape[0]
    capacity = 4 * n + 64
    children = np.full((capacity, 4), _EMPTY, dtype=np.int64)
    count = np.zeros(capacity, dtype=np.int64)
    pos_sum = np.zeros((capacity, 2), dtype=np.float64)
    center = np.zeros((capacity, 2), dtype=np.float64)
    half = np.zeros(capacity, dtype=np.float64)
    point_index = np.full(capacity, _EMPTY, dtype=np.int64)

    min_x = pos[0, 0]
    max_x = pos[0, 0]
    min_y = pos[0, 1]
    max_y = pos[0, 1]
    for i in range(1, n):
        if pos[i, 0] < min_x:
            min_x = pos[i, 0]
        if pos[i, 0] > max_x:
            max_x = pos[i, 0]
        if pos[i, 1] < min_y:
            min_y = pos[i, 1]
        if pos[i, 1] > max_y:
            max_y = pos[i, 1]
    span = max(max_x - min_x, max_y - min_y)
    root_half = span * 0.5 + 1e-9 + span * 1e-12
    center[0, 0] = (min_x + max_x) * 0.5
    center[0, 1] = (min_y + max_y) * 0.5
    half[0] = root_half
    n_nodes = 1

    # one insertion can create at most two nodes per level down to MAX_DEPTH
    headroom = 2 * (MAX_DEPTH + 2)
    for i in range(n):
        if n_nodes + headroom > capacity:
            capacity *= 2
            children = _grow_int2d(children, capacity, _EMPTY)
            count = _grow_int1d(count, capacity, 0)
            pos_sum = _grow_f2d(pos_sum, capacity)
            center = _grow_f2d(center, capacity)
            half = _grow_f1d(half, capacity)
            point_index = _grow_int1d(point_index, capacity, _EMPTY)
        node = 0
        depth = 0
        while True:
            count[node] += 1
            pos_sum[node, 0] += pos[i, 0]
            pos_sum[node, 1] += pos[i, 1]
            if count[node] == 1:
                point_index[node] = i  # first occupant: leaf
                break
            if point_index[node] != _INTERNAL:
                # occupied leaf: bucket coincident points, else split
                j = point_index[node]
                if depth >= MAX_DEPTH:
                    break
                point_index[node] = _INTERNAL
                # push previous occupant one level down
                q = _quadrant(pos[j, 0], pos[j, 1], center[node, 0], center[node, 1])
                child = _make_child(node, q, children, center, half, n_nodes)
                n_nodes += 1
                count[child] = 1
                pos_sum[child, 0] = pos[j, 0]
                pos_sum[child, 1] = pos[j, 1]
                point_index[child] = j
            q = _quadrant(pos[i, 0], pos[i, 1], center[node, 0], center[node, 1])
            child = children[node, q]
            if child == _EMPTY:
                child = _make_child(node, q, children, center, half, n_nodes)
                n_nodes += 1
            node = child
            depth += 1

    mass_center = np.zeros((n_nodes, 2), dtype=np.float64)
    for k in range(n_nodes):
        if count[k] > 0:
            mass_center[k, 0] = pos_sum[k, 0] / count[k]
            mass_center[k, 1] = pos_sum[k, 1] / count[k]
    return children[:n_nodes], count[:n_nodes], mass_center, center[:n_nodes], half[:n_nodes], n_nodes


@njit(cache=True, inline="always")
def _quadrant(x, y, cx, cy):
    q = 0
    if x > cx:
        q += 1
    if y > cy:
        q += 2
    return q


@njit(cache=True, inline="always")
def _make_child(node, q, children, center, half, n_nodes):
    child = n_nodes
    children[node, q] = child
    shift = half[node] * 0.5
    center[child, 0] = center[node, 0] + (shift if q % 2 == 1 else -shift)
    center[child, 1] = center[node, 1] + (shift if q >= 2 else -shift)
    half[child] = shift
    return child


@njit(cache=True, parallel=True)
def repulsive_forces(pos, children, count, mass_center, half, theta):
    """Numerators of the repulsive term plus the Student-t weight total.

    For every point: sum over accepted cells of count * w^2 * (y_i - mu_cell)
    with w = 1 / (1 + ||y_i - mu_cell||^2). A cell is accepted when it is a
    leaf or when cell_width / distance < theta; otherwise it is opened. The
    per-point weight sums exclude the point itself and add up to the global
    normalizer Z.

    Points are processed in parallel but each writes only its own row, and
    the Z reduction runs sequentially afterwards, so the result does not
    depend on the thread count.
    """
    n = pos.shape[0]
    forces = np.zeros((n, 2), dtype=np.float64)
    z_per_point = np.empty(n, dtype=np.float64)
    theta2 = theta * theta
    for i in prange(n):
        stack = np.empty(256, dtype=np.int64)
        xi = pos[i, 0]
        yi = pos[i, 1]
        fx = 0.0
        fy = 0.0
        zi = 0.0
        top = 0
        stack[0] = 0
        while top >= 0:
            node = stack[top]
            top -= 1
            if count[node] == 0:
                continue
            dx = xi - mass_center[node, 0]
            dy = yi - mass_center[node, 1]
            d2 = dx * dx + dy * dy
            width = 2.0 * half[node]
            is_leaf = (
                children[node, 0] == _EMPTY
                and children[node, 1] == _EMPTY
                and children[node, 2] == _EMPTY
                and children[node, 3] == _EMPTY
            )
            if is_leaf or width * width < theta2 * d2:
                w = 1.0 / (1.0 + d2)
                cw = count[node] * w
                zi += cw
                cw *= w
                fx += cw * dx
                fy += cw * dy
            else:
                for q in range(4):
                    child = children[node, q]
                    if child != _EMPTY:
                        top += 1
                        stack[top] = child
        forces[i, 0] = fx
        forces[i, 1] = fy
        z_per_point[i] = zi - 1.0  # remove the self pair (w = 1 at distance 0)
    z_total = 0.0
    for i in range(n):
        z_total += z_per_point[i]
    return forces, z_total


@njit(cache=True, parallel=True)
def attractive_forces(pos, indptr, indices, data):
    """Attractive term over the sparse affinity support.

    Returns per-point sums of p_ij * w_ij * (y_i - y_j) and the support
    statistic sum(p_ij * log(w_ij)) used for the KL trace. Same deterministic
    parallel scheme as the repulsive pass.
    """
    n = pos.shape[0]
    forces = np.zeros((n, 2), dtype=np.float64)
    plw_per_point = np.empty(n, dtype=np.float64)
    for i in prange(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        fx = 0.0
        fy = 0.0
        plw = 0.0
        for ptr in range(indptr[i], indptr[i + 1]):
            j = indices[ptr]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            w = 1.0 / (1.0 + dx * dx + dy * dy)
            pw = data[ptr] * w
            fx += pw * dx
            fy += pw * dy
            plw += data[ptr] * np.log(w)
        forces[i, 0] = fx
        forces[i, 1] = fy
        plw_per_point[i] = plw
    p_log_w = 0.0
    for i in range(n):
        p_log_w += plw_per_point[i]
    return forces, p_log_w


def barnes_hut_gradient(pos, indptr, indices, data, theta):
    """KL gradient via Barnes-Hut: exact attraction on the sparse support,
    tree-approximated repulsion. Returns (gradient, z_total, p_log_w)."""
    children, count, mass_center, _center, half, _n = build(pos)
    rep, z_total = repulsive_forces(pos, children, count, mass_center, half, theta)
    attr, p_log_w = attractive_forces(pos, indptr, indices, data)
    grad = 4.0 * (attr - rep / z_total)
    return grad, z_total, p_log_w
