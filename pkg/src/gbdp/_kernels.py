"""Compiled inner loops shared by the oracle, trainer and validator.

Decisions are carried as integer indices into the per-slot price grid;
``ex[s, j]`` holds the logit weight of slot ``s`` at grid price ``j``.
Cut stacks are padded 3-d arrays ``A3[t, j, s]`` / ``b3[t, j]`` with the
live plane count of stage ``t`` in ``counts[t]``.

Every stage objective, whichever optimizer produced the decision, is
finally evaluated by ``stage_value`` so that the exact and approximate
solvers share their arithmetic.
"""
import numpy as np
from numba import njit

COORDINATE = 0
FULL_GRID = 1
MAX_SWEEPS = 200


@njit(cache=True)
def plane_values(A, b, m, x):
    n = x.shape[0]
    h = np.empty(m)
    for j in range(m):
        acc = 0.0
        for s in range(n):
            acc += A[j, s] * x[s]
        h[j] = acc + b[j]
    return h


@njit(cache=True)
def min_at_offsets(h, A, active, slots):
    """min over active planes at x + sum of unit vectors listed in ``slots``.

    ``h`` holds the plane values at x; ``slots`` rows are -1 padded.
    """
    P, K = slots.shape
    out = np.empty(P)
    for p in range(P):
        best = np.inf
        for jj in range(active.shape[0]):
            j = active[jj]
            v = h[j]
            for k in range(K):
                s = slots[p, k]
                if s >= 0:
                    v += A[j, s]
            if v < best:
                best = v
        out[p] = best
    return out


@njit(cache=True)
def stage_value(qx, w, mask, idx, ex, grid, lam, r):
    """Q(x) + lam * sum_s e_s (r + d_s + w_s) / (1 + sum_s e_s)."""
    E = 0.0
    N = 0.0
    for s in range(w.shape[0]):
        if mask[s]:
            e = ex[s, idx[s]]
            E += e
            N += e * (r + grid[idx[s]] + w[s])
    return qx + lam * N / (1.0 + E)


@njit(cache=True)
def coordinate_search(qx, w, mask, ex, grid, lam, r, idx0):
    n = w.shape[0]
    G = grid.shape[0]
    idx = idx0.copy()
    if lam > 0.0:
        for _ in range(MAX_SWEEPS):
            moved = False
            for s in range(n):
                if not mask[s]:
                    continue
                E = 1.0
                N = 0.0
                for k in range(n):
                    if k != s and mask[k]:
                        e = ex[k, idx[k]]
                        E += e
                        N += e * (r + grid[idx[k]] + w[k])
                cur_e = ex[s, idx[s]]
                cur = (N + cur_e * (r + grid[idx[s]] + w[s])) / (E + cur_e)
                best = -np.inf
                best_j = idx[s]
                for j in range(G):
                    e = ex[s, j]
                    v = (N + e * (r + grid[j] + w[s])) / (E + e)
                    if v > best:
                        best = v
                        best_j = j
                if best > cur + 1e-13 * (abs(cur) + 1.0) and best_j != idx[s]:
                    idx[s] = best_j
                    moved = True
            if not moved:
                break
    return idx, stage_value(qx, w, mask, idx, ex, grid, lam, r)


@njit(cache=True)
def grid_search(qx, w, mask, ex, grid, lam, r):
    """Exhaustive search in lexicographic grid order; first maximum wins.

    Full slots do not affect the objective and stay at index 0.
    """
    n = w.shape[0]
    G = grid.shape[0]
    act = np.empty(n, np.int64)
    na = 0
    for s in range(n):
        if mask[s]:
            act[na] = s
            na += 1
    idx = np.zeros(n, np.int64)
    best_idx = idx.copy()
    best = stage_value(qx, w, mask, idx, ex, grid, lam, r)
    while True:
        p = na - 1
        while p >= 0:
            s = act[p]
            idx[s] += 1
            if idx[s] < G:
                break
            idx[s] = 0
            p -= 1
        if p < 0:
            break
        v = stage_value(qx, w, mask, idx, ex, grid, lam, r)
        if v > best:
            best = v
            best_idx[:] = idx
    return best_idx, best


@njit(cache=True)
def solve_stage(qx, w, mask, ex, grid, lam, r, idx0, mode):
    if mode == FULL_GRID:
        return grid_search(qx, w, mask, ex, grid, lam, r)
    return coordinate_search(qx, w, mask, ex, grid, lam, r, idx0)


@njit(cache=True)
def neighbour_values(A, b, m, x):
    """Approximation at x and at x + 1_s; returns (Q(x), Q(x+1_s) - Q(x))."""
    n = x.shape[0]
    h = plane_values(A, b, m, x)
    qx = np.inf
    for j in range(m):
        if h[j] < qx:
            qx = h[j]
    w = np.empty(n)
    for s in range(n):
        best = np.inf
        for j in range(m):
            v = h[j] + A[j, s]
            if v < best:
                best = v
        w[s] = best - qx
    return qx, w


@njit(cache=True)
def sample_outcome(x, x_max, idx, ex, lam, u):
    """Inverse-CDF draw over [stay, slot 0, ..., slot n-1]; returns 0 or s+1."""
    n = x.shape[0]
    E = 0.0
    for s in range(n):
        if x[s] < x_max[s]:
            E += ex[s, idx[s]]
    denom = 1.0 + E
    cum = (1.0 - lam) + lam / denom
    if u < cum:
        return 0
    last = 0
    for s in range(n):
        if x[s] < x_max[s]:
            cum += lam * ex[s, idx[s]] / denom
            last = s + 1
            if u < cum:
                return s + 1
    return last


@njit(cache=True)
def epoch_step(A, b, m, x, x_max, ex, grid, lam, r, idx0, u, mode):
    """Greedy decision against one stage approximation, then one transition."""
    qx, w = neighbour_values(A, b, m, x)
    mask = x < x_max
    idx, val = solve_stage(qx, w, mask, ex, grid, lam, r, idx0, mode)
    outcome = sample_outcome(x, x_max, idx, ex, lam, u)
    return idx, val, outcome


@njit(cache=True)
def forward_sweep(A3, b3, counts, x_max, ex, grid, lam, r, cost, uniforms, mode):
    T = uniforms.shape[0]
    n = x_max.shape[0]
    G = grid.shape[0]
    states = np.zeros((T + 1, n), np.int64)
    decisions = np.empty((T, n), np.int64)
    outcomes = np.empty(T, np.int64)
    idx = np.full(n, G - 1, np.int64)
    x = np.zeros(n, np.int64)
    revenue = 0.0
    for t in range(T):
        # epoch t + 1 looks ahead to stage t + 2
        idx, _, o = epoch_step(A3[t + 2], b3[t + 2], counts[t + 2], x, x_max,
                               ex, grid, lam, r, idx, uniforms[t], mode)
        decisions[t] = idx
        outcomes[t] = o
        if o > 0:
            revenue += r + grid[idx[o - 1]]
            x[o - 1] += 1
        states[t + 1] = x
    total = 0
    for s in range(n):
        total += x[s]
    return states, decisions, outcomes, revenue - cost * total


@njit(cache=True)
def local_bellman(A, b, m, x, x_max, ex, grid, lam, r, mode, z_slots, z_index):
    """T Q at x and x + 1_s, with Q the min over the m planes."""
    n = x.shape[0]
    G = grid.shape[0]
    h = plane_values(A, b, m, x)
    fz = min_at_offsets(h, A, np.arange(m), z_slots)
    return _local_from_z(fz, x, x_max, ex, grid, lam, r, mode, z_index, n, G)


@njit(cache=True)
def _local_from_z(fz, x, x_max, ex, grid, lam, r, mode, z_index, n, G):
    vals = np.empty(n + 1)
    idx0 = np.full(n, G - 1, np.int64)
    w = np.empty(n)
    mask = np.empty(n, np.bool_)
    for s in range(-1, n):
        qy = fz[z_index[s + 1, 0]]
        for k in range(n):
            w[k] = fz[z_index[s + 1, k + 1]] - qy
            yk = x[k] + (1 if k == s else 0)
            mask[k] = yk < x_max[k]
        _, v = solve_stage(qy, w, mask, ex, grid, lam, r, idx0, mode)
        vals[s + 1] = v
    return vals


@njit(cache=True)
def plane_bellman(a, hx, x, x_max, ex, grid, lam, r, mode):
    """T H at x and x + 1_s for a single plane H with gradient a, H(x) = hx."""
    n = x.shape[0]
    G = grid.shape[0]
    vals = np.empty(n + 1)
    idx0 = np.full(n, G - 1, np.int64)
    mask = np.empty(n, np.bool_)
    for s in range(-1, n):
        qy = hx + (a[s] if s >= 0 else 0.0)
        for k in range(n):
            yk = x[k] + (1 if k == s else 0)
            mask[k] = yk < x_max[k]
        _, v = solve_stage(qy, a, mask, ex, grid, lam, r, idx0, mode)
        vals[s + 1] = v
    return vals


@njit(cache=True)
def prune_planes(h, A, m, reach):
    """Planes that can attain the minimum somewhere in x + {v >= 0, |v|_1 <= reach}."""
    n = A.shape[1]
    lower = np.empty(m)
    upper_min = np.inf
    for j in range(m):
        lo = 0.0
        hi = 0.0
        for s in range(n):
            if A[j, s] < lo:
                lo = A[j, s]
            if A[j, s] > hi:
                hi = A[j, s]
        lower[j] = h[j] + reach * lo
        up = h[j] + reach * hi
        if up < upper_min:
            upper_min = up
    keep = np.empty(m, np.int64)
    c = 0
    for j in range(m):
        if lower[j] <= upper_min:
            keep[c] = j
            c += 1
    return keep[:c]


@njit(cache=True)
def z_inside(x, x_max, z_slots):
    """Which Z(x) points lie in the state box."""
    out = np.empty(z_slots.shape[0], np.bool_)
    for k in range(z_slots.shape[0]):
        s, u = z_slots[k, 0], z_slots[k, 1]
        ok = True
        if s >= 0:
            ok = x[s] + 1 + (1 if u == s else 0) <= x_max[s]
        if ok and u >= 0 and u != s:
            ok = x[u] + 1 <= x_max[u]
        out[k] = ok
    return out


@njit(cache=True)
def z_check(h, A, active, fz, inside, pair_y, pair_z, pair_meet, join_slots, eps):
    # values outside the box are -inf, so pairs touching them hold trivially
    for p in range(pair_y.shape[0]):
        if not (inside[pair_y[p]] and inside[pair_z[p]]):
            continue
        best = np.inf
        for jj in range(active.shape[0]):
            j = active[jj]
            v = h[j]
            for k in range(join_slots.shape[1]):
                s = join_slots[p, k]
                if s >= 0:
                    v += A[j, s]
            if v < best:
                best = v
        if best + fz[pair_meet[p]] > fz[pair_y[p]] + fz[pair_z[p]] + eps:
            return False
    return True


@njit(cache=True)
def submodular_on_z(A, b, m, x, x_max, z_slots, pair_y, pair_z, pair_meet, join_slots, eps):
    h = plane_values(A, b, m, x)
    active = prune_planes(h, A, m, 4.0)
    fz = min_at_offsets(h, A, active, z_slots)
    inside = z_inside(x, x_max, z_slots)
    return z_check(h, A, active, fz, inside, pair_y, pair_z, pair_meet, join_slots, eps)


@njit(cache=True)
def backward_step(A, b, m, x, x_max, ex, grid, lam, r, mode,
                  z_slots, z_index, pair_y, pair_z, pair_meet, join_slots, eps):
    """Local values for the new cut at stage t from stage t+1 planes.

    Returns (values at Y_+(x), gate_passed, j_star); j_star is -1 when the
    submodularity gate passed.
    """
    n = x.shape[0]
    G = grid.shape[0]
    h = plane_values(A, b, m, x)
    active = prune_planes(h, A, m, 4.0)
    fz = min_at_offsets(h, A, active, z_slots)
    inside = z_inside(x, x_max, z_slots)
    if z_check(h, A, active, fz, inside, pair_y, pair_z, pair_meet, join_slots, eps):
        return _local_from_z(fz, x, x_max, ex, grid, lam, r, mode, z_index, n, G), True, -1
    idx0 = np.full(n, G - 1, np.int64)
    mask = x < x_max
    best = np.inf
    j_star = 0
    for j in range(m):
        _, v = solve_stage(h[j], A[j], mask, ex, grid, lam, r, idx0, mode)
        if v < best:
            best = v
            j_star = j
    vals = plane_bellman(A[j_star], h[j_star], x, x_max, ex, grid, lam, r, mode)
    return vals, False, j_star


@njit(cache=True)
def exact_bellman(v_next, states, strides, x_max, ex, grid, lam, r):
    """One exact Bellman step over the whole state box (full grid search)."""
    S, n = states.shape
    out = np.empty(S)
    w = np.empty(n)
    dec = np.empty((S, n), np.int64)
    for i in range(S):
        x = states[i]
        qx = v_next[i]
        mask = x < x_max
        for s in range(n):
            w[s] = v_next[i + strides[s]] - qx if mask[s] else 0.0
        idx, val = grid_search(qx, w, mask, ex, grid, lam, r)
        out[i] = val
        dec[i] = idx
    return out, dec
