"""Cut generation by alternating forward and backward sweeps.

Each iteration samples one trajectory greedily against the current upper
bound (forward sweep, giving the sample profit ``l``), then walks the
trajectory backwards adding one cut per stage (backward sweep). After the
backward sweep ``u = Q_1(0)`` is recorded.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import rng
from .cuts import SUBMODULAR_EPS, CutStack, Hyperplane, as_arrays, fit_hyperplane, z_structure
from .model import DPInstance, choice_table, decision_grid, terminal_cost
from .oracle import ExactValueTable, all_states, fixed_point, solve_exact, DEFAULT_BUDGET

OPTIMIZERS = {"coordinate": K.COORDINATE, "grid": K.FULL_GRID}
EXACT_TOL = 1e-9


@dataclass
class SamplePath:
    states: np.ndarray
    decisions: np.ndarray
    outcomes: np.ndarray
    profit: float
    # oracle resampling only: the (possibly replaced) states the backward sweep uses
    cut_states: np.ndarray | None = None


@dataclass
class TrainingTrace:
    u: list = field(default_factory=list)
    l: list = field(default_factory=list)
    cut_counts: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    fallback_cuts: list = field(default_factory=list)

    @property
    def cum_avg_l(self) -> np.ndarray:
        l = np.asarray(self.l, dtype=np.float64)
        return np.cumsum(l) / np.arange(1, l.shape[0] + 1)

    def __len__(self):
        return len(self.u)


class _Stage:
    """Grid, logit table and optimizer code for one instance."""

    def __init__(self, inst: DPInstance, optimizer: str = "coordinate"):
        if optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {optimizer!r}; choose from {sorted(OPTIMIZERS)}")
        self.inst = inst
        self.grid = decision_grid(inst)
        self.ex = choice_table(inst, self.grid)
        self.mode = OPTIMIZERS[optimizer]
        self.x_max = np.ascontiguousarray(inst.x_max)

    def grid_index(self, prices) -> np.ndarray:
        prices = np.asarray(prices, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.grid, prices), 0, len(self.grid) - 1)
        lower = np.clip(idx - 1, 0, None)
        closer = np.abs(self.grid[lower] - prices) < np.abs(self.grid[idx] - prices)
        idx = np.where(closer, lower, idx)
        if not np.allclose(self.grid[idx], prices, rtol=0, atol=1e-9):
            raise ValueError("initial prices must lie on the decision grid")
        return idx.astype(np.int64)


def _arrays(planes):
    A, b = as_arrays(planes)
    return np.ascontiguousarray(A, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)


def greedy_decision(planes, x, inst: DPInstance, init=None, optimizer="coordinate"):
    """Best grid prices at x against the next-stage planes.

    Returns ``(prices, expected value)``. The coordinate search starts at
    ``init`` (default: every slot at ``price_hi``).
    """
    st = _Stage(inst, optimizer)
    A, b = _arrays(planes)
    x = np.asarray(x, dtype=np.int64)
    idx0 = np.full(inst.n, len(st.grid) - 1, np.int64) if init is None else st.grid_index(init)
    qx, w = K.neighbour_values(A, b, b.shape[0], x)
    idx, val = K.solve_stage(qx, w, x < st.x_max, st.ex, st.grid, inst.lam, inst.revenue, idx0, st.mode)
    return st.grid[idx], float(val)


def local_bellman(planes, x, inst: DPInstance, optimizer="coordinate") -> np.ndarray:
    """(T Q)(y) for y = x, x + 1_1, ..., x + 1_n (in that order)."""
    st = _Stage(inst, optimizer)
    A, b = _arrays(planes)
    x = np.asarray(x, dtype=np.int64)
    z = z_structure(inst.n)
    return K.local_bellman(A, b, b.shape[0], x, st.x_max, st.ex, st.grid, inst.lam,
                           inst.revenue, st.mode, z.slots, z.index)


def initial_cuts(inst: DPInstance, init: str = "fixed_point") -> CutStack:
    """Stages 1..horizon start from one plane; the last stage is exactly -C."""
    cuts = CutStack(inst.n, inst.horizon)
    if init == "fixed_point":
        top = fixed_point(inst)
    elif init == "infinity":
        top = Hyperplane(np.zeros(inst.n), inst.big_m)
    else:
        raise ValueError(f"unknown initialisation {init!r}")
    for t in range(1, inst.horizon + 1):
        cuts.add(t, top)
    cuts.add(inst.horizon + 1, Hyperplane(np.full(inst.n, -inst.cost_per_order), 0.0))
    return cuts


def forward_sweep(cuts: CutStack, inst: DPInstance, uniforms, optimizer="coordinate",
                  resample=None, _stage=None) -> SamplePath:
    """Greedy rollout from the empty state.

    ``uniforms`` is either a generator (one draw per epoch is taken) or an
    array of per-epoch uniforms. ``resample(stage, x)`` may replace each
    newly reached state; it is only used for oracle-mode training.
    """
    st = _stage or _Stage(inst, optimizer)
    if isinstance(uniforms, np.random.Generator):
        uniforms = uniforms.random(inst.horizon)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if uniforms.shape != (inst.horizon,):
        raise ValueError(f"need {inst.horizon} uniforms, got {uniforms.shape}")
    if resample is None:
        states, dec, outcomes, profit = K.forward_sweep(
            cuts.A, cuts.b, cuts.counts, st.x_max, st.ex, st.grid, inst.lam,
            inst.revenue, inst.cost_per_order, uniforms, st.mode)
        return SamplePath(states, st.grid[dec], outcomes, float(profit))

    T, n = inst.horizon, inst.n
    states = np.zeros((T + 1, n), np.int64)
    cut_states = np.zeros((T + 1, n), np.int64)
    dec = np.empty((T, n), np.int64)
    outcomes = np.empty(T, np.int64)
    x = np.zeros(n, np.int64)
    idx = np.full(n, len(st.grid) - 1, np.int64)
    revenue = 0.0
    for t in range(T):
        idx, _, o = K.epoch_step(cuts.A[t + 2], cuts.b[t + 2], cuts.counts[t + 2], x, st.x_max,
                                 st.ex, st.grid, inst.lam, inst.revenue, idx, uniforms[t], st.mode)
        dec[t] = idx
        outcomes[t] = o
        x = x.copy()
        if o > 0:
            revenue += inst.revenue + st.grid[idx[o - 1]]
            x[o - 1] += 1
        states[t + 1] = x
        x = np.asarray(resample(t + 1, x), dtype=np.int64)
        cut_states[t + 1] = x
    profit = revenue - terminal_cost(x, inst)
    return SamplePath(states, st.grid[dec], outcomes, float(profit), cut_states)


def boundary_values(vals, x, inst: DPInstance) -> np.ndarray:
    """Replace local values at x + 1_s outside the box by -big_m.

    Outside the box the terminal cost is infinite, so the value there is
    minus infinity; -big_m is its finite stand-in. Fitting through the
    capacity-clipped value instead would tilt the cut below V inside the box.
    """
    vals = np.array(vals, dtype=np.float64)
    full = np.flatnonzero(np.asarray(x) >= inst.x_max)
    vals[full + 1] = -inst.big_m
    return vals


def backward_sweep(path: SamplePath, cuts: CutStack, inst: DPInstance, optimizer="coordinate",
                   _stage=None) -> CutStack:
    """Add one cut to each stage t = horizon..1, fit around the path state x_{t+1}.

    If the stage-(t+1) approximation is submodular on Z(x_{t+1}) the cut
    interpolates T Q_{t+1} on Y_+(x_{t+1}); otherwise it interpolates T H
    for the single plane H of stage t+1 with the smallest (T H)(x_{t+1}).
    The fallback count is stored on the returned stack as ``last_fallbacks``.
    """
    st = _stage or _Stage(inst, optimizer)
    z = z_structure(inst.n)
    xs = path.cut_states if path.cut_states is not None else path.states
    fallbacks = 0
    for t in range(inst.horizon, 0, -1):
        x = np.ascontiguousarray(xs[t])
        vals, passed, _ = K.backward_step(
            cuts.A[t + 1], cuts.b[t + 1], cuts.counts[t + 1], x, st.x_max, st.ex, st.grid,
            inst.lam, inst.revenue, st.mode, z.slots, z.index, z.pair_y, z.pair_z,
            z.pair_meet, z.join_slots, SUBMODULAR_EPS)
        fallbacks += not passed
        cuts.add(t, fit_hyperplane(x, boundary_values(vals, x, inst)))
    cuts.last_fallbacks = fallbacks
    return cuts


class _OracleResampler:
    """Replace a reached state whose stage value is already exact by a random inexact one."""

    def __init__(self, cuts, exact: ExactValueTable, seed, iteration):
        self.cuts = cuts
        self.exact = exact
        self.states = all_states(exact.inst)
        self.seed = seed
        self.iteration = iteration
        self.replaced = 0

    def __call__(self, stage, x):
        q = self.cuts.evaluate(stage, x)
        if q - self.exact.value(stage, x) > EXACT_TOL:
            return x
        gaps = self.cuts.evaluate_many(stage, self.states) - self.exact.stage(stage)
        pending = np.flatnonzero(gaps > EXACT_TOL)
        if pending.size == 0:
            return x
        pick = rng.stream(self.seed, rng.RESAMPLE, self.iteration, stage).integers(pending.size)
        self.replaced += 1
        return self.states[pending[pick]].copy()


def train(inst: DPInstance, i_max: int, seed: int = 0, resample_mode: str = "off",
          optimizer: str = "coordinate", init: str = "fixed_point",
          exact: ExactValueTable | None = None, budget: int = DEFAULT_BUDGET,
          callback=None):
    """Run ``i_max`` iterations; returns ``(cuts, trace)``.

    ``resample_mode="oracle"`` needs the exact value table (computed here
    if not given) and fails with ``BudgetExceeded`` on large instances.
    ``callback(i, cuts, trace)`` runs after every iteration.
    """
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    if resample_mode not in ("off", "oracle"):
        raise ValueError(f"unknown resample mode {resample_mode!r}")
    if resample_mode == "oracle" and exact is None:
        exact = solve_exact(inst, budget)
    st = _Stage(inst, optimizer)
    cuts = initial_cuts(inst, init)
    trace = TrainingTrace()
    origin = np.zeros(inst.n, np.int64)
    for i in range(1, i_max + 1):
        t0 = time.perf_counter()
        uniforms = rng.epoch_uniforms(seed, rng.TRAIN, i, inst.horizon)
        resample = _OracleResampler(cuts, exact, seed, i) if resample_mode == "oracle" else None
        path = forward_sweep(cuts, inst, uniforms, resample=resample, _stage=st)
        backward_sweep(path, cuts, inst, _stage=st)
        trace.u.append(cuts.evaluate(1, origin))
        trace.l.append(path.profit)
        trace.cut_counts.append(cuts.counts[1:].copy())
        trace.fallback_cuts.append(cuts.last_fallbacks)
        trace.wall_time.append(time.perf_counter() - t0)
        if callback is not None:
            callback(i, cuts, trace)
    return cuts, trace
