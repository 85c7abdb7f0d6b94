"""Monte Carlo evaluation of a frozen cut policy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .cuts import CutStack
from .model import DPInstance
from .trainer import _Stage
from . import _kernels as K


@dataclass
class ValidationSummary:
    samples: np.ndarray
    mean: float
    std: float
    support_lo: float
    support_hi: float

    @property
    def k(self) -> int:
        return int(self.samples.shape[0])


def profit_support(inst: DPInstance) -> tuple[float, float]:
    """Smallest and largest profit any sweep can realize.

    Each order contributes between ``r + price_lo - cost`` and
    ``r + price_hi - cost``; at most ``sum(x_max)`` orders arrive.
    """
    cap = float(inst.x_max.sum())
    lo = cap * (inst.revenue + inst.price_lo - inst.cost_per_order)
    hi = cap * (inst.revenue + inst.price_hi - inst.cost_per_order)
    return min(0.0, lo), max(0.0, hi)


def summarize(samples, support) -> ValidationSummary:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 2:
        raise ValueError("need at least two samples")
    return ValidationSummary(
        samples=samples,
        mean=float(np.mean(samples)),
        std=float(np.std(samples, ddof=1)),
        support_lo=float(support[0]),
        support_hi=float(support[1]),
    )


def validate(cuts: CutStack, inst: DPInstance, k_max: int, seed: int = 0,
             optimizer: str = "coordinate") -> ValidationSummary:
    """Run ``k_max`` greedy sweeps against the frozen cuts.

    Sweep k draws its epoch uniforms from its own stream, so samples do not
    depend on the order in which sweeps are run.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if (cuts.n, cuts.horizon) != (inst.n, inst.horizon):
        raise ValueError("cut store does not match the instance dimensions")
    if np.any(cuts.counts[1:] == 0):
        raise ValueError("cut store has an empty stage")
    st = _Stage(inst, optimizer)
    samples = np.empty(k_max)
    for k in range(k_max):
        u = rng.epoch_uniforms(seed, rng.VALIDATE, k, inst.horizon)
        samples[k] = K.forward_sweep(cuts.A, cuts.b, cuts.counts, st.x_max, st.ex, st.grid,
                                     inst.lam, inst.revenue, inst.cost_per_order, u, st.mode)[3]
    return summarize(samples, profit_support(inst))
