"""Slot-pricing DP instance with multinomial-logit order arrivals.

States are integer order counts per delivery slot, ``0 <= x <= x_max``.
In every epoch at most one customer arrives (probability ``lam``) and
either books one slot or leaves. Slots that are full are removed from the
customer's choice set, so the process never leaves the state box.

Transition probabilities are returned as an array of length ``n + 1``:
entry 0 is the probability of staying at ``x``, entry ``s + 1`` is the
probability of moving to ``x + 1_s``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_GRID_STEP = 0.25


@dataclass(frozen=True)
class DPInstance:
    n: int
    x_max: np.ndarray
    horizon: int
    lam: float
    beta_c: float
    beta_d: float
    beta_s: np.ndarray
    price_lo: float
    price_hi: float
    revenue: float
    cost_per_order: float
    big_m: float | None = None
    price_grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        x_max = np.array(self.x_max, dtype=np.int64).reshape(-1)
        beta_s = np.array(self.beta_s, dtype=np.float64).reshape(-1)
        x_max.flags.writeable = False
        beta_s.flags.writeable = False
        object.__setattr__(self, "x_max", x_max)
        object.__setattr__(self, "beta_s", beta_s)
        for name in ("lam", "beta_c", "beta_d", "price_lo", "price_hi",
                     "revenue", "cost_per_order", "price_grid_step"):
            object.__setattr__(self, name, float(getattr(self, name)))

        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n", f"must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if x_max.shape[0] != self.n:
            raise ConfigError("x_max", f"length {x_max.shape[0]} does not match n={self.n}")
        if beta_s.shape[0] != self.n:
            raise ConfigError("beta_s", f"length {beta_s.shape[0]} does not match n={self.n}")
        if np.any(x_max < 1):
            raise ConfigError("x_max", "every slot capacity must be >= 1")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("horizon", f"must be an integer >= 1, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam", f"must lie in [0, 1], got {self.lam}")
        if not self.beta_d < 0.0:
            raise ConfigError("beta_d", f"price sensitivity must be negative, got {self.beta_d}")
        if self.price_lo > self.price_hi:
            raise ConfigError("price_lo", "price_lo must not exceed price_hi")
        if not self.price_grid_step > 0.0:
            raise ConfigError("price_grid_step", "must be positive")
        if self.price_hi > self.price_lo and self.price_grid_step > self.price_hi - self.price_lo:
            raise ConfigError("price_grid_step", "step is larger than the price range")
        for name in ("beta_c", "price_lo", "price_hi", "revenue", "cost_per_order"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")
        if not np.all(np.isfinite(beta_s)):
            raise ConfigError("beta_s", "must be finite")

        floor_m = (self.price_hi + self.revenue) * float(x_max.sum())
        if self.big_m is None:
            default = 2.0 * floor_m if floor_m > 0 else floor_m + 1.0
            object.__setattr__(self, "big_m", default)
        else:
            object.__setattr__(self, "big_m", float(self.big_m))
            if not self.big_m > floor_m:
                raise ConfigError("big_m", f"must exceed (price_hi + revenue) * sum(x_max) = {floor_m}")

    @property
    def n_states(self) -> int:
        return int(np.prod(self.x_max + 1))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def is_feasible(x, inst: DPInstance) -> bool:
    x = np.asarray(x)
    return bool(x.shape == (inst.n,) and np.all(x >= 0) and np.all(x <= inst.x_max))


def _check_state(x, inst):
    x = np.asarray(x, dtype=np.int64)
    if not is_feasible(x, inst):
        raise ValueError(f"state {x.tolist()} is outside the state box")
    return x


def _check_prices(d, inst):
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (inst.n,):
        raise ValueError(f"price vector must have length {inst.n}")
    if np.any(d < inst.price_lo) or np.any(d > inst.price_hi):
        raise ValueError(f"prices {d.tolist()} outside [{inst.price_lo}, {inst.price_hi}]")
    return d


def choice_weights(x, d, inst: DPInstance) -> np.ndarray:
    """exp(beta_c + beta_s + beta_d * d_s) per slot, zero for full slots."""
    x = np.asarray(x, dtype=np.int64)
    d = np.asarray(d, dtype=np.float64)
    e = np.exp(inst.beta_c + inst.beta_s + inst.beta_d * d)
    return np.where(x < inst.x_max, e, 0.0)


def transition_probs(x, d, inst: DPInstance) -> np.ndarray:
    x = _check_state(x, inst)
    d = _check_prices(d, inst)
    e = choice_weights(x, d, inst)
    denom = 1.0 + e.sum()
    probs = np.empty(inst.n + 1)
    probs[0] = (1.0 - inst.lam) + inst.lam / denom
    probs[1:] = inst.lam * e / denom
    return probs


def successors(x) -> np.ndarray:
    """Y_+(x) as rows: x itself, then x + 1_s for each slot."""
    x = np.asarray(x, dtype=np.int64)
    return np.vstack([x, x + np.eye(x.shape[0], dtype=np.int64)])


def stage_revenue(x, y, d, inst: DPInstance) -> float:
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    step = y - x
    if np.all(step == 0):
        return 0.0
    if step.min() < 0 or step.sum() != 1:
        raise ValueError(f"{y.tolist()} is not a unit step from {x.tolist()}")
    s = int(np.argmax(step))
    return inst.revenue + float(np.asarray(d, dtype=np.float64)[s])


def terminal_cost(x, inst: DPInstance) -> float:
    x = np.asarray(x, dtype=np.int64)
    if not is_feasible(x, inst):
        return inst.big_m
    return inst.cost_per_order * int(x.sum())


def decision_grid(inst: DPInstance) -> np.ndarray:
    """Per-slot candidate prices, ascending."""
    lo, hi, step = inst.price_lo, inst.price_hi, inst.price_grid_step
    if step <= 0:
        raise ValueError("price_grid_step must be positive")
    if hi == lo:
        return np.array([lo])
    if step > hi - lo:
        raise ValueError("price_grid_step is larger than the price range")
    count = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(count + 1)
    if grid[-1] < hi - 1e-9 * max(1.0, abs(hi)):
        grid = np.append(grid, hi)
    grid[-1] = min(grid[-1], hi)
    return grid


def choice_table(inst: DPInstance, grid=None) -> np.ndarray:
    """exp(beta_c + beta_s + beta_d * p) for every slot s and grid price p."""
    if grid is None:
        grid = decision_grid(inst)
    return np.exp(inst.beta_c + inst.beta_s[:, None] + inst.beta_d * grid[None, :])


# -- default choice profile --------------------------------------------------

TABLE1 = dict(
    x_bar=6, horizon=6990, lam=0.008, price_lo=0.0, price_hi=10.0,
    revenue=34.53, cost_per_order=0.083,
)
TARGET_STAY_PROB = 0.9951
DEFAULT_BETA_D = -0.1


def calibrate_beta_c(beta_s, lam, stay_prob, beta_d=DEFAULT_BETA_D, price=0.0) -> float:
    """Offset such that P_{x,x} at uniform price ``price`` equals ``stay_prob``.

    Requires ``1 - lam < stay_prob < 1``.
    """
    buy = (1.0 - stay_prob) / lam
    if not 0.0 < buy < 1.0:
        raise ValueError("stay_prob must lie in (1 - lam, 1)")
    total = buy / (1.0 - buy)
    beta_s = np.asarray(beta_s, dtype=np.float64)
    return math.log(total) - math.log(np.exp(beta_s + beta_d * price).sum())


def default_beta_s(n: int) -> np.ndarray:
    """Popularity decreasing linearly from +2 to -2 across the slots.

    With this spread the most popular slot's expected demand at the lowest
    price exceeds its capacity, so capacity binds and pricing matters.
    """
    if n == 1:
        return np.zeros(1)
    return np.linspace(2.0, -2.0, n)


def table1_instance(n: int = 17, horizon: int | None = None, **overrides) -> DPInstance:
    """The numerical example's instance with the shipped choice profile.

    The logit parameters are not part of the published example; this profile
    uses ``beta_d = -0.1`` per pound, popularities spread over [-2, 2] and an
    offset calibrated so that the no-order probability at the lowest price
    is 0.9951.
    """
    p = dict(TABLE1)
    beta_s = default_beta_s(n)
    beta_d = overrides.pop("beta_d", DEFAULT_BETA_D)
    lam = overrides.pop("lam", p["lam"])
    beta_c = overrides.pop(
        "beta_c", calibrate_beta_c(beta_s, lam, TARGET_STAY_PROB, beta_d, p["price_lo"]))
    kw = dict(
        n=n, x_max=np.full(n, p["x_bar"]), horizon=horizon or p["horizon"], lam=lam,
        beta_c=beta_c, beta_d=beta_d, beta_s=beta_s, price_lo=p["price_lo"],
        price_hi=p["price_hi"], revenue=p["revenue"], cost_per_order=p["cost_per_order"],
    )
    kw.update(overrides)
    return DPInstance(**kw)


# -- config files --------------------------------------------------------------

_REQUIRED = ("n", "x_max", "horizon", "lam", "beta_c", "beta_d", "beta_s",
             "price_lo", "price_hi", "revenue", "cost_per_order")
_OPTIONAL = ("big_m", "price_grid_step")


def instance_from_mapping(data: dict) -> DPInstance:
    known = set(_REQUIRED) | set(_OPTIONAL)
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown key")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(key, "missing required key")
    for key in ("x_max", "beta_s"):
        if not isinstance(data[key], (list, tuple)):
            raise ConfigError(key, "must be a list")
    for key in ("n", "horizon"):
        if isinstance(data[key], bool) or not isinstance(data[key], int):
            raise ConfigError(key, "must be an integer")
    for key, value in data.items():
        if key in ("x_max", "beta_s", "n", "horizon"):
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"must be a number, got {value!r}")
    if any(isinstance(v, bool) or not isinstance(v, int) for v in data["x_max"]):
        raise ConfigError("x_max", "entries must be integers")
    try:
        return DPInstance(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("instance", str(exc)) from exc


def load_instance(path) -> DPInstance:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    return instance_from_mapping(data)


def dump_instance(inst: DPInstance) -> str:
    """TOML text that ``load_instance`` reads back to an equal instance."""
    def fmt(v):
        if isinstance(v, list):
            return "[" + ", ".join(fmt(u) for u in v) + "]"
        if isinstance(v, float):
            return repr(v)
        return str(v)
    lines = [f"{k} = {fmt(v)}" for k, v in inst.to_dict().items()]
    return "\n".join(lines) + "\n"
