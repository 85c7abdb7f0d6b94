"""Finite-sample lower bounds on validation profits.

Tail bounds (``cantelli``, ``dkw_tail``) give a level that one fresh
validation profit exceeds with probability at least 1 - alpha. Expectation
bounds (``bernstein``, ``dkw_expectation``, ``hoeffding``, ``gaussian``) give
a level that the true mean profit exceeds with confidence 1 - alpha_e.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc

from .errors import BoundUnavailable
from .model import DPInstance, transition_probs

TAIL_BOUNDS = ("cantelli", "dkw_tail")
EXPECTATION_BOUNDS = ("bernstein", "dkw_expectation", "hoeffding", "gaussian")
ALL_BOUNDS = TAIL_BOUNDS + EXPECTATION_BOUNDS
LOG10_FLOOR = -300.0


class EmpiricalCDF:
    """Right-continuous step CDF, F(l) = #{samples <= l} / k."""

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
        if s.shape[0] == 0:
            raise ValueError("empirical CDF needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        self.sorted = s

    @property
    def k(self) -> int:
        return int(self.sorted.shape[0])

    def __call__(self, l):
        return np.searchsorted(self.sorted, l, side="right") / self.k


def _check_prob(name, p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")


def _check_support(support):
    lo, hi = map(float, support)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValueError(f"degenerate support [{lo}, {hi}]")
    return lo, hi


# -- tail bounds ----------------------------------------------------------------

def cantelli_bound(mean, std, k, alpha, theta_c=0.0) -> float:
    """One-sided Chebyshev level with the sample mean and std plugged in.

    ``theta_c`` bounds the probability that the sample std is zero.
    """
    _check_prob("alpha", alpha)
    if k < 2:
        raise ValueError("k must be >= 2")
    if not alpha > theta_c:
        raise ValueError(f"alpha={alpha} must exceed theta_c={theta_c}")
    return float(mean - std * math.sqrt((1.0 - alpha) * (k - 1) / ((alpha - theta_c) * k)))


def dkw_threshold(k, alpha, theta_d) -> float:
    return alpha - theta_d - math.sqrt(math.log(1.0 / theta_d) / (2.0 * k))


def dkw_tail_bound(cdf: EmpiricalCDF, alpha, theta_d, support) -> float:
    """sup{l in support : F(l) <= c} on the empirical step CDF.

    Raises BoundUnavailable when that set is empty.
    """
    _check_prob("alpha", alpha)
    if not 0.0 < theta_d < alpha:
        raise ValueError(f"theta_d must lie in (0, alpha), got {theta_d}")
    lo, hi = _check_support(support)
    k = cdf.k
    c = dkw_threshold(k, alpha, theta_d)
    if c < 0:
        raise BoundUnavailable(f"threshold {c:.4g} is negative; need more samples or a larger alpha")
    m = int(math.floor(c * k + 1e-12))  # largest j with j / k <= c
    if m >= k:
        return hi
    top = float(cdf.sorted[m])
    if top <= lo:
        raise BoundUnavailable("empirical CDF exceeds the threshold at the bottom of the support")
    return min(top, hi)


def lambert_w_minus1(x: float, tol: float = 1e-15, max_iter: int = 64) -> float:
    """Lower real branch of the Lambert W function on [-1/e, 0)."""
    x = float(x)
    branch = -math.exp(-1.0)
    if not branch <= x < 0.0:
        if branch - x < 1e-17 and x < branch:
            x = branch
        else:
            raise ValueError(f"x must lie in [-1/e, 0), got {x}")
    if x == branch:
        return -1.0
    q = 2.0 * (1.0 + math.e * x)
    if q < 0.5:
        # series about the branch point
        p = -math.sqrt(q)
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if w_new > -1.0:
            # keep to the lower branch
            w_new = 0.5 * (w - 1.0)
        if abs(w_new - w) <= tol * abs(w_new):
            return w_new
        w = w_new
    return w


def optimal_theta_d(alpha, k) -> float:
    """theta_d maximizing the DKW tail bound, clipped to alpha."""
    _check_prob("alpha", alpha)
    if k < 1:
        raise ValueError("k must be >= 1")
    return min(alpha, math.sqrt(math.exp(lambert_w_minus1(-1.0 / (4.0 * k)))))


# -- expectation bounds --------------------------------------------------------

def bernstein_expectation_bound(mean, std, k, alpha_e, support, paper_literal=False) -> float:
    """Empirical Bernstein bound on the mean.

    ``paper_literal`` uses the std itself where the variance belongs.
    """
    _check_prob("alpha_e", alpha_e)
    if k < 2:
        raise ValueError("k must be >= 2")
    lo, hi = _check_support(support)
    log_term = math.log(2.0 / alpha_e)
    spread = std if paper_literal else std * std
    return float(mean - math.sqrt(2.0 * spread * log_term / k)
                 - 7.0 * (hi - lo) * log_term / (3.0 * (k - 1)))


def dkw_expectation_bound(cdf: EmpiricalCDF, alpha_e, lower=0.0) -> float:
    """Integral of the lowered survival function, max(0, 1 - F - c).

    Samples are shifted by ``lower`` so the integral starts at zero; the
    shift is added back to the result.
    """
    _check_prob("alpha_e", alpha_e)
    s = cdf.sorted - lower
    if s[0] < 0:
        raise ValueError("samples below the lower support; pass lower=<support minimum>")
    k = cdf.k
    c = math.sqrt(math.log(1.0 / alpha_e) / (2.0 * k))
    widths = np.diff(np.concatenate([[0.0], s]))
    heights = np.maximum(0.0, 1.0 - np.arange(k) / k - c)
    return float(np.dot(widths, heights) + lower)


def hoeffding_bound(mean, k, alpha_e, support) -> float:
    _check_prob("alpha_e", alpha_e)
    lo, hi = _check_support(support)
    return float(mean - (hi - lo) * math.sqrt(math.log(1.0 / alpha_e) / (2.0 * k)))


def student_t_cdf(t, df) -> float:
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return float(1.0 - tail if t >= 0 else tail)


def student_t_quantile(p, df) -> float:
    """Inverse of the Student-t CDF by bracketing root search."""
    _check_prob("p", p)
    if df <= 0:
        raise ValueError("df must be positive")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, df)
    hi = 1.0
    while student_t_cdf(hi, df) < p:
        hi *= 2.0
    return brentq(lambda t: student_t_cdf(t, df) - p, 0.0, hi, xtol=1e-12, rtol=1e-15)


def gaussian_bound(mean, std, k, alpha_e) -> float:
    """Student-t lower confidence limit for the mean."""
    _check_prob("alpha_e", alpha_e)
    if k < 2:
        raise ValueError("k must be >= 2")
    if std == 0:
        return float(mean)
    return float(mean - student_t_quantile(1.0 - alpha_e, k - 1) * std / math.sqrt(k))


# -- probability of a zero sample std -------------------------------------------

def theta_c_log10_from(stay_prob, n_states, horizon, k) -> float:
    """log10 of n_states * stay_prob ** (horizon * k), capped at 0."""
    if stay_prob <= 0:
        return LOG10_FLOOR
    value = math.log10(n_states) + horizon * k * math.log10(stay_prob)
    return min(0.0, value)


def theta_c_log10(inst: DPInstance, k) -> float:
    """Upper bound on log10 Pr(all k validation sweeps see no order)."""
    x0 = np.zeros(inst.n, dtype=np.int64)
    stay = transition_probs(x0, np.full(inst.n, inst.price_lo), inst)[0]
    return theta_c_log10_from(stay, inst.n_states, inst.horizon, k)


def theta_c_upper(inst: DPInstance, k) -> float:
    """The same bound as a probability; 0 once it drops below 1e-300."""
    v = theta_c_log10(inst, k)
    return 0.0 if v < LOG10_FLOOR else 10.0 ** v


# -- reports -----------------------------------------------------------------------

@dataclass
class BoundReport:
    name: str
    alpha: float
    value: float
    available: bool = True
    reason: str = ""
    params: dict = field(default_factory=dict)


def compute_bounds(samples, support, alpha=0.1, alpha_e=0.1, names=ALL_BOUNDS,
                   theta_d="auto", theta_c=0.0, paper_literal_bernstein=False) -> list[BoundReport]:
    """Evaluate the named bounds on one sample set."""
    samples = np.asarray(samples, dtype=np.float64)
    k = samples.shape[0]
    if k < 2:
        raise ValueError("need at least two samples")
    unknown = [n for n in names if n not in ALL_BOUNDS]
    if unknown:
        raise ValueError(f"unknown bounds {unknown}; choose from {list(ALL_BOUNDS)}")
    mean = float(np.mean(samples))
    std = float(np.std(samples, ddof=1))
    cdf = EmpiricalCDF(samples)
    td = optimal_theta_d(alpha, k) if theta_d == "auto" else float(theta_d)

    def dkw_tail(td):
        if td >= alpha:
            # the clipped optimum leaves a negative threshold
            raise BoundUnavailable(f"theta_d={td:.4g} is not below alpha={alpha:.4g}")
        return dkw_tail_bound(cdf, alpha, td, support)

    def run(name):
        if name == "cantelli":
            return alpha, {"theta_c": theta_c}, lambda: cantelli_bound(mean, std, k, alpha, theta_c)
        if name == "dkw_tail":
            return alpha, {"theta_d": td}, lambda: dkw_tail(td)
        if name == "bernstein":
            return alpha_e, {"paper_literal": paper_literal_bernstein}, lambda: bernstein_expectation_bound(
                mean, std, k, alpha_e, support, paper_literal_bernstein)
        if name == "dkw_expectation":
            return alpha_e, {"lower": support[0]}, lambda: dkw_expectation_bound(cdf, alpha_e, support[0])
        if name == "hoeffding":
            return alpha_e, {}, lambda: hoeffding_bound(mean, k, alpha_e, support)
        return alpha_e, {}, lambda: gaussian_bound(mean, std, k, alpha_e)

    out = []
    for name in names:
        level, params, fn = run(name)
        try:
            out.append(BoundReport(name, level, fn(), params=params))
        except BoundUnavailable as exc:
            out.append(BoundReport(name, level, math.nan, False, exc.reason, params))
    return out
