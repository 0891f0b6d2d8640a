"""Box feasible set: projection, active/free split, gradient splitting, step lengths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfeasiblePoint


@dataclass(frozen=True, eq=False)
class BoxConstraints:
    """``lower <= x <= upper`` with infinite entries allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        up = np.array(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != up.shape:
            raise DimensionMismatch(f"bound shapes differ: {lo.shape} vs {up.shape}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("bounds must not be NaN")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")
        lo.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def unbounded(cls, n: int) -> "BoxConstraints":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True, eq=False)
class ActiveFreeSplit:
    """Index partition into lower-active, upper-active and free, each sorted.

    ``fixed`` lists the lower-active indices with ``l_i == u_i``; their
    chopped gradient is zero since no move can release them.
    """

    lower_active: np.ndarray
    upper_active: np.ndarray
    free: np.ndarray
    n: int
    fixed: np.ndarray = np.zeros(0, dtype=np.int64)

    @property
    def active(self) -> np.ndarray:
        return np.union1d(self.lower_active, self.upper_active)

    def free_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.free] = True
        return mask

    @classmethod
    def from_masks(cls, lower_mask, upper_mask) -> "ActiveFreeSplit":
        lower_mask = np.asarray(lower_mask, dtype=bool)
        upper_mask = np.asarray(upper_mask, dtype=bool)
        fixed = lower_mask & upper_mask
        upper_mask = upper_mask & ~lower_mask
        free = ~(lower_mask | upper_mask)
        return cls(np.flatnonzero(lower_mask), np.flatnonzero(upper_mask),
                   np.flatnonzero(free), lower_mask.size, np.flatnonzero(fixed))


def _check(x, box):
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise DimensionMismatch(f"vector of shape {x.shape} for a box of dimension {box.n}")
    return x


def project(x, box: BoxConstraints) -> np.ndarray:
    x = _check(x, box)
    return np.minimum(box.upper, np.maximum(box.lower, x))


def classify(x, box: BoxConstraints) -> ActiveFreeSplit:
    x = _check(x, box)
    if np.any(x < box.lower) or np.any(x > box.upper):
        raise InfeasiblePoint("point lies outside the box")
    # l_i == u_i is classified lower-active by from_masks
    return ActiveFreeSplit.from_masks(x == box.lower, x == box.upper)


def free_gradient(g, s: ActiveFreeSplit) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (s.n,):
        raise DimensionMismatch("gradient length does not match the split")
    out = np.zeros_like(g)
    out[s.free] = g[s.free]
    return out


def chopped_gradient(g, s: ActiveFreeSplit) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (s.n,):
        raise DimensionMismatch("gradient length does not match the split")
    out = np.zeros_like(g)
    out[s.lower_active] = np.minimum(g[s.lower_active], 0.0)
    out[s.upper_active] = np.maximum(g[s.upper_active], 0.0)
    out[s.fixed] = 0.0
    return out


def projected_gradient(gf, gc) -> np.ndarray:
    return np.asarray(gf, dtype=float) + np.asarray(gc, dtype=float)


def zero_on_active(v, s: ActiveFreeSplit) -> np.ndarray:
    return free_gradient(v, s)


def max_feasible_step(x, d, box: BoxConstraints) -> float:
    """Largest ``alpha >= 0`` with ``x - alpha * d`` inside the box."""
    return feasible_step_and_limiters(x, d, box)[0]


def feasible_step_and_limiters(x, d, box: BoxConstraints):
    """Maximal feasible step along ``-d`` plus the indices attaining it.

    The limiting indices are the ones the solver snaps onto their bounds,
    returned as ``(lower_hits, upper_hits)``.
    """
    x = _check(x, box)
    d = _check(d, box)
    pos = d > 0
    neg = d < 0
    lo_ratio = np.full(x.shape, np.inf)
    up_ratio = np.full(x.shape, np.inf)
    # tiny |d| may overflow to inf, which correctly means "not limiting"
    with np.errstate(over="ignore"):
        lo_ratio[pos] = (x[pos] - box.lower[pos]) / d[pos]
        up_ratio[neg] = (x[neg] - box.upper[neg]) / d[neg]
    alpha = float(min(lo_ratio.min(initial=np.inf), up_ratio.min(initial=np.inf)))
    if not np.isfinite(alpha):
        empty = np.zeros(0, dtype=np.int64)
        return np.inf, empty, empty
    alpha = max(alpha, 0.0)
    return alpha, np.flatnonzero(lo_ratio <= alpha), np.flatnonzero(up_ratio <= alpha)
