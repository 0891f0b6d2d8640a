"""Brute-force ground truth for tiny box QPs by enumerating active configurations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .constraints import BoxConstraints
from .errors import NoFeasibleKkt
from .problems import QpProblem

MAX_ORACLE_N = 12
_AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2


@dataclass(frozen=True)
class OracleSolution:
    x: np.ndarray
    f: float
    configuration: tuple  # per index: "lower" | "upper" | "free"


def brute_force_boxqp(problem: QpProblem, box: BoxConstraints) -> OracleSolution:
    """Enumerate all 3^n lower/upper/free assignments and keep the best KKT point.

    Each assignment fixes the bound components, solves the reduced system on
    the free ones and accepts the point if it is primal feasible and the
    fixed components satisfy the dual sign conditions.
    """
    n = problem.n
    if n > MAX_ORACLE_N:
        raise ValueError(f"brute force oracle is limited to n <= {MAX_ORACLE_N}")
    A = problem.A.toarray()
    b = problem.b
    lo, up = box.lower, box.upper
    scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
    dual_tol = 1e-12 * scale
    primal_tol = 1e-12 * scale

    choices = []
    for i in range(n):
        if lo[i] == up[i]:
            choices.append((_AT_LOWER,))
            continue
        opts = []
        if np.isfinite(lo[i]):
            opts.append(_AT_LOWER)
        if np.isfinite(up[i]):
            opts.append(_AT_UPPER)
        opts.append(_FREE)
        choices.append(tuple(opts))

    best = None
    for config in itertools.product(*choices):
        config = np.array(config)
        x = np.where(config == _AT_LOWER, lo, up).astype(float)
        free = config == _FREE
        x[free] = 0.0
        if free.any():
            fixed = ~free
            rhs = b[free] - A[np.ix_(free, fixed)] @ x[fixed]
            try:
                x[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
            xf = x[free]
            if np.any(xf < lo[free] - primal_tol) or np.any(xf > up[free] + primal_tol):
                continue
            x[free] = np.clip(xf, lo[free], up[free])
        g = A @ x - b
        at_lower = (config == _AT_LOWER) & (lo < up)
        if np.any(g[at_lower] < -dual_tol) or np.any(g[config == _AT_UPPER] > dual_tol):
            continue
        f = float(0.5 * x @ A @ x - x @ b)
        if best is None or f < best[0]:
            best = (f, x, config)
    if best is None:
        raise NoFeasibleKkt("no assignment satisfied the KKT conditions")
    names = ("lower", "upper", "free")
    return OracleSolution(best[1], best[0], tuple(names[c] for c in best[2]))
