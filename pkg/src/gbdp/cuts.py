"""Piecewise-affine upper bounds: stacks of hyperplanes, one stack per stage.

A stage approximation is ``Q_t(x) = min_j <a_j, x> + b_j``. Planes are
global, so stacks can be evaluated anywhere on the integer lattice,
including just outside the state box.

Functions taking ``planes`` accept either a ``(A, b)`` pair of arrays or a
sequence of :class:`Hyperplane`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from . import _kernels as K

SUBMODULAR_EPS = 1e-9
SUPPORT_TOL = 1e-9
DEDUP_TOL = 1e-12
STORE_FORMAT = "gbdp-cuts"
STORE_VERSION = 1


@dataclass(frozen=True)
class Hyperplane:
    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(a)) and np.isfinite(self.b)):
            raise ValueError("hyperplane coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def __call__(self, x) -> float:
        return float(np.dot(self.a, np.asarray(x, dtype=np.float64)) + self.b)


def as_arrays(planes):
    if isinstance(planes, tuple) and len(planes) == 2 and isinstance(planes[0], np.ndarray):
        A, b = planes
        return np.asarray(A, dtype=np.float64), np.asarray(b, dtype=np.float64)
    planes = list(planes)
    if not planes:
        return np.zeros((0, 0)), np.zeros(0)
    return np.vstack([p.a for p in planes]), np.array([p.b for p in planes])


def evaluate(planes, x) -> float:
    """Pointwise minimum of the planes at x."""
    A, b = as_arrays(planes)
    if b.shape[0] == 0:
        raise ValueError("cannot evaluate an empty stack")
    return float(np.min(A @ np.asarray(x, dtype=np.float64) + b))


def evaluate_many(planes, points) -> np.ndarray:
    A, b = as_arrays(planes)
    if b.shape[0] == 0:
        raise ValueError("cannot evaluate an empty stack")
    pts = np.asarray(points, dtype=np.float64)
    return np.min(pts @ A.T + b, axis=1)


def supporting_set(planes, x, tol=SUPPORT_TOL) -> set[int]:
    A, b = as_arrays(planes)
    if b.shape[0] == 0:
        return set()
    vals = A @ np.asarray(x, dtype=np.float64) + b
    return set(np.flatnonzero(vals <= vals.min() + tol).tolist())


def z_points(x) -> np.ndarray:
    """Z(x) = {x + 1_s + 1_s' : s, s' in {0, 1, ..., n}} without duplicates."""
    x = np.asarray(x, dtype=np.int64)
    s = z_structure(x.shape[0])
    return x + s.offsets


def is_submodular_on(planes, points, eps=SUBMODULAR_EPS, x_max=None) -> bool:
    """Pairwise lattice check f(y v z) + f(y ^ z) <= f(y) + f(z) + eps.

    With ``x_max`` given, f is taken as -inf outside ``0 <= x <= x_max``;
    pairs touching such points then hold trivially and are skipped.
    """
    A, b = as_arrays(planes)
    pts = np.unique(np.asarray(points, dtype=np.int64), axis=0)
    if x_max is not None:
        pts = pts[np.all((pts >= 0) & (pts <= np.asarray(x_max)), axis=1)]
    if pts.shape[0] < 2:
        return True
    f = evaluate_many((A, b), pts)
    for i in range(pts.shape[0] - 1):
        others = pts[i + 1:]
        hi = np.maximum(pts[i], others)
        lo = np.minimum(pts[i], others)
        lhs = evaluate_many((A, b), hi) + evaluate_many((A, b), lo)
        if np.any(lhs > f[i] + f[i + 1:] + eps):
            return False
    return True


def fit_hyperplane(x, values) -> Hyperplane:
    """Plane through (x, values[0]) and (x + 1_s, values[s + 1]) for every slot.

    ``values`` may be a sequence of length n + 1 or a mapping keyed by
    0 (for x) and s + 1 (for x + 1_s).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if isinstance(values, dict):
        missing = [k for k in range(n + 1) if k not in values]
        if missing:
            raise ValueError(f"missing local values for keys {missing}")
        values = [values[k] for k in range(n + 1)]
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} local values, got {values.shape}")
    a = values[1:] - values[0]
    b = values[0] - float(np.dot(a, x))
    return Hyperplane(a, b)


@dataclass(frozen=True)
class ZStructure:
    """Index tables for Z(x) and its incomparable pairs, for dimension n.

    Offsets are 1_s + 1_s' with s <= s' in {-1, 0, ..., n-1}, -1 standing
    for the zero vector. ``index[s + 1, s' + 1]`` locates an offset.
    """
    offsets: np.ndarray
    slots: np.ndarray
    index: np.ndarray
    pair_y: np.ndarray
    pair_z: np.ndarray
    pair_meet: np.ndarray
    join_slots: np.ndarray


@lru_cache(maxsize=None)
def z_structure(n: int) -> ZStructure:
    keys = [(-1, -1)] + [(-1, s) for s in range(n)]
    keys += [(s, u) for s in range(n) for u in range(s, n)]
    index = np.empty((n + 1, n + 1), dtype=np.int64)
    offsets = np.zeros((len(keys), n), dtype=np.int64)
    slots = np.full((len(keys), 2), -1, dtype=np.int64)
    lookup = {}
    for i, (s, u) in enumerate(keys):
        index[s + 1, u + 1] = index[u + 1, s + 1] = i
        for k, v in enumerate((s, u)):
            if v >= 0:
                offsets[i, v] += 1
                slots[i, k] = v
        lookup[offsets[i].tobytes()] = i
    py, pz, pm, js = [], [], [], []
    for i, j in combinations(range(len(keys)), 2):
        u, v = offsets[i], offsets[j]
        if np.all(u <= v) or np.all(v <= u):
            continue
        join = np.maximum(u, v)
        meet = np.minimum(u, v)
        row = [s for s in np.flatnonzero(join) for _ in range(join[s])]
        py.append(i)
        pz.append(j)
        pm.append(lookup[meet.tobytes()])
        js.append(row + [-1] * (4 - len(row)))
    as_i = lambda v: np.array(v, dtype=np.int64)
    return ZStructure(
        offsets=offsets, slots=slots, index=index, pair_y=as_i(py), pair_z=as_i(pz),
        pair_meet=as_i(pm), join_slots=as_i(js).reshape(-1, 4),
    )


def is_submodular_on_z(planes, x, eps=SUBMODULAR_EPS, x_max=None) -> bool:
    """Same check as ``is_submodular_on(planes, z_points(x), eps, x_max)``, compiled."""
    A, b = as_arrays(planes)
    x = np.asarray(x, dtype=np.int64)
    z = z_structure(x.shape[0])
    if x_max is None:
        x_max = x + 2
    x_max = np.ascontiguousarray(x_max, dtype=np.int64)
    return bool(K.submodular_on_z(np.ascontiguousarray(A), b, b.shape[0], x, x_max, z.slots,
                                  z.pair_y, z.pair_z, z.pair_meet, z.join_slots, eps))


class CutStack:
    """Per-stage plane stacks for stages 1..horizon+1.

    Storage is padded so compiled sweeps can read every stage at once;
    planes of stage t are ``A[t, :counts[t]]``, ``b[t, :counts[t]]`` in
    insertion order.
    """

    def __init__(self, n: int, horizon: int, capacity: int = 4):
        self.n = int(n)
        self.horizon = int(horizon)
        self.A = np.zeros((horizon + 2, capacity, n))
        self.b = np.zeros((horizon + 2, capacity))
        self.counts = np.zeros(horizon + 2, dtype=np.int64)
        self.last_fallbacks = 0

    def _check_stage(self, t):
        if not 1 <= t <= self.horizon + 1:
            raise IndexError(f"stage {t} outside 1..{self.horizon + 1}")

    def _grow(self):
        cap = self.A.shape[1]
        A = np.zeros((self.horizon + 2, 2 * cap, self.n))
        b = np.zeros((self.horizon + 2, 2 * cap))
        A[:, :cap] = self.A
        b[:, :cap] = self.b
        self.A, self.b = A, b

    def planes(self, t):
        self._check_stage(t)
        m = self.counts[t]
        return self.A[t, :m], self.b[t, :m]

    def hyperplanes(self, t) -> list[Hyperplane]:
        A, b = self.planes(t)
        return [Hyperplane(A[j], b[j]) for j in range(b.shape[0])]

    def add(self, t, plane: Hyperplane) -> bool:
        """Append a plane unless an existing one matches within 1e-12."""
        self._check_stage(t)
        A, b = self.planes(t)
        if b.shape[0]:
            same = np.all(np.abs(A - plane.a) <= DEDUP_TOL, axis=1) & (np.abs(b - plane.b) <= DEDUP_TOL)
            if np.any(same):
                return False
        m = self.counts[t]
        if m == self.A.shape[1]:
            self._grow()
        self.A[t, m] = plane.a
        self.b[t, m] = plane.b
        self.counts[t] = m + 1
        return True

    def evaluate(self, t, x) -> float:
        return evaluate(self.planes(t), x)

    def evaluate_many(self, t, points) -> np.ndarray:
        return evaluate_many(self.planes(t), points)

    def copy(self) -> "CutStack":
        out = CutStack(self.n, self.horizon, self.A.shape[1])
        out.A[:] = self.A
        out.b[:] = self.b
        out.counts[:] = self.counts
        return out

    def to_dict(self) -> dict:
        cuts = {}
        for t in range(1, self.horizon + 2):
            A, b = self.planes(t)
            cuts[str(t)] = [
                {"a": [float(v).hex() for v in A[j]], "b": float(b[j]).hex()}
                for j in range(b.shape[0])
            ]
        return {"format": STORE_FORMAT, "version": STORE_VERSION,
                "n": self.n, "horizon": self.horizon, "cuts": cuts}

    @classmethod
    def from_dict(cls, data: dict) -> "CutStack":
        if data.get("format") != STORE_FORMAT:
            raise ValueError("not a cut store")
        if data.get("version") != STORE_VERSION:
            raise ValueError(f"unsupported cut store version {data.get('version')}")
        n, horizon = int(data["n"]), int(data["horizon"])
        stack = cls(n, horizon)
        for t in range(1, horizon + 2):
            for row in data["cuts"].get(str(t), []):
                a = [float.fromhex(v) for v in row["a"]]
                if len(a) != n:
                    raise ValueError(f"stage {t}: plane of dimension {len(a)}, expected {n}")
                m = stack.counts[t]
                if m == stack.A.shape[1]:
                    stack._grow()
                stack.A[t, m] = a
                stack.b[t, m] = float.fromhex(row["b"])
                stack.counts[t] = m + 1
        return stack

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")))

    @classmethod
    def load(cls, path) -> "CutStack":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, CutStack):
            return NotImplemented
        if (self.n, self.horizon) != (other.n, other.horizon):
            return False
        if not np.array_equal(self.counts, other.counts):
            return False
        return all(
            np.array_equal(self.planes(t)[0], other.planes(t)[0])
            and np.array_equal(self.planes(t)[1], other.planes(t)[1])
            for t in range(1, self.horizon + 2)
        )
