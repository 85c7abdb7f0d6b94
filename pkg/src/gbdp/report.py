"""Gap reports against the exact solution, and CSV tables for figures.

Money columns are written with 17 significant digits so doubles survive a
text round trip unchanged.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import ALL_BOUNDS, compute_bounds
from .cuts import CutStack
from .model import DPInstance
from .oracle import ExactValueTable, all_states

NA = "NA"
UPPER_TOL = 1e-9


def money(v) -> str:
    v = float(v)
    return NA if math.isnan(v) else f"{v:.17g}"


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_columns(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return {k: [r[k] for r in rows] for k in rows[0]}


# -- comparison with the exact solution -----------------------------------------

@dataclass
class GapReport:
    gaps: np.ndarray      # (horizon + 1, n_states), row t - 1 is stage t
    u_gap: float

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    @property
    def is_upper_bound(self) -> bool:
        return self.min_gap >= -UPPER_TOL


def run_compare(exact: ExactValueTable, cuts: CutStack, inst: DPInstance) -> GapReport:
    """Q_t(x) - V_t(x) over every stage and state."""
    if exact.values.shape != (inst.horizon + 1, inst.n_states):
        raise ValueError("exact table does not match the instance")
    if (cuts.n, cuts.horizon) != (inst.n, inst.horizon):
        raise ValueError("cut store does not match the instance")
    states = all_states(inst)
    gaps = np.vstack([cuts.evaluate_many(t, states) - exact.stage(t)
                      for t in range(1, inst.horizon + 2)])
    return GapReport(gaps, float(gaps[0, 0]))


def write_gaps(report: GapReport, path):
    rows = [[i, t + 1, money(g)] for t in range(report.gaps.shape[0])
            for i, g in enumerate(report.gaps[t])]
    return write_rows(path, ["state_index", "t", "gap"], rows)


# -- figure tables --------------------------------------------------------------

def write_trace(trace, path):
    cum = trace.cum_avg_l
    rows = [[i + 1, money(u), money(l), money(c)]
            for i, (u, l, c) in enumerate(zip(trace.u, trace.l, cum))]
    return write_rows(path, ["i", "u", "l", "cum_avg_l"], rows)


def converge_table(trace_csv, path):
    """fig_converge.csv: i, u, l, cum_avg per training iteration."""
    cols = read_columns(trace_csv)
    l = np.array(cols["l"], dtype=np.float64)
    cum = np.cumsum(l) / np.arange(1, l.shape[0] + 1)
    rows = [[i, u, lv, money(c)] for i, u, lv, c in zip(cols["i"], cols["u"], cols["l"], cum)]
    return write_rows(path, ["i", "u", "l", "cum_avg"], rows)


def hist_table(samples, path, bins=20):
    """fig_hist.csv: one row per bin with its edges and count."""
    counts, edges = np.histogram(np.asarray(samples, dtype=np.float64), bins=bins)
    rows = [[money(edges[j]), money(edges[j + 1]), int(counts[j])] for j in range(counts.shape[0])]
    return write_rows(path, ["bin_lo", "bin_hi", "count"], rows)


def default_alpha_grid(points=25) -> np.ndarray:
    return np.logspace(-3, math.log10(0.5), points)


def bounds_table(samples, support, path, alphas=None, names=ALL_BOUNDS, **kw):
    """fig_bounds.csv: one row per significance level, one column per bound.

    Tail and expectation bounds share the level; unavailable cells are NA.
    """
    alphas = default_alpha_grid() if alphas is None else np.asarray(alphas, dtype=np.float64)
    rows = []
    for a in alphas:
        reps = compute_bounds(samples, support, alpha=a, alpha_e=a, names=names, **kw)
        rows.append([money(a)] + [money(r.value) if r.available else NA for r in reps])
    return write_rows(path, ["alpha", *names], rows)
