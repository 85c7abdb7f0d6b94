"""Exact backward recursion on small instances, and the analytic fixed point.

States are indexed in mixed radix with digit s in 0..x_max[s], slot 0 the
least significant digit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .cuts import Hyperplane
from .errors import BudgetExceeded
from .model import DPInstance, choice_table, decision_grid

DEFAULT_BUDGET = 10**8


def strides(inst: DPInstance) -> np.ndarray:
    radix = inst.x_max + 1
    return np.concatenate([[1], np.cumprod(radix[:-1])]).astype(np.int64)


def state_index(x, inst: DPInstance) -> int:
    x = np.asarray(x, dtype=np.int64)
    if np.any(x < 0) or np.any(x > inst.x_max):
        raise ValueError(f"state {x.tolist()} is outside the state box")
    return int(np.dot(x, strides(inst)))


def all_states(inst: DPInstance) -> np.ndarray:
    """Every state of the box, row i being the state with index i."""
    idx = np.arange(inst.n_states)
    radix = inst.x_max + 1
    out = np.empty((idx.shape[0], inst.n), dtype=np.int64)
    for s in range(inst.n):
        out[:, s] = idx % radix[s]
        idx = idx // radix[s]
    return out


def evaluation_count(inst: DPInstance) -> int:
    return inst.n_states * inst.horizon * len(decision_grid(inst)) ** inst.n


def check_budget(inst: DPInstance, budget: int = DEFAULT_BUDGET):
    count = evaluation_count(inst)
    if count > budget:
        raise BudgetExceeded(f"exact solution needs {count:.3g} evaluations, budget is {budget:.3g}")


def bellman_apply(v_next, inst: DPInstance, return_decisions=False):
    """(T V)(x) for every state, maximizing over the full price grid."""
    v_next = np.asarray(v_next, dtype=np.float64)
    if v_next.shape != (inst.n_states,):
        raise ValueError(f"value map must cover all {inst.n_states} states")
    grid = decision_grid(inst)
    out, dec = K.exact_bellman(v_next, all_states(inst), strides(inst), inst.x_max,
                               choice_table(inst, grid), grid, inst.lam, inst.revenue)
    if return_decisions:
        return out, grid[dec]
    return out


def terminal_values(inst: DPInstance) -> np.ndarray:
    return -inst.cost_per_order * all_states(inst).sum(axis=1).astype(np.float64)


@dataclass
class ExactValueTable:
    """V_t over the state box for t = 1..horizon+1 (row t-1)."""
    inst: DPInstance
    values: np.ndarray

    def value(self, t, x) -> float:
        return float(self.values[t - 1, state_index(x, self.inst)])

    def stage(self, t) -> np.ndarray:
        return self.values[t - 1]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state_index", "t", "value"])
            for t in range(1, self.values.shape[0] + 1):
                for i, v in enumerate(self.values[t - 1]):
                    w.writerow([i, t, f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, inst: DPInstance) -> "ExactValueTable":
        values = np.full((inst.horizon + 1, inst.n_states), np.nan)
        with Path(path).open() as fh:
            for row in csv.DictReader(fh):
                values[int(row["t"]) - 1, int(row["state_index"])] = float(row["value"])
        if np.isnan(values).any():
            raise ValueError("exact table file does not cover every (t, state)")
        return cls(inst, values)


def solve_exact(inst: DPInstance, budget: int = DEFAULT_BUDGET) -> ExactValueTable:
    check_budget(inst, budget)
    values = np.empty((inst.horizon + 1, inst.n_states))
    values[inst.horizon] = terminal_values(inst)
    for t in range(inst.horizon - 1, -1, -1):
        values[t] = bellman_apply(values[t + 1], inst)
    return ExactValueTable(inst, values)


def fixed_point(inst: DPInstance) -> Hyperplane:
    """V*(x) = (price_hi + r) <1, x_max - x> - C(x_max) as a plane."""
    m = inst.price_hi + inst.revenue
    c_full = inst.cost_per_order * int(inst.x_max.sum())
    return Hyperplane(np.full(inst.n, -m), m * float(inst.x_max.sum()) - c_full)
