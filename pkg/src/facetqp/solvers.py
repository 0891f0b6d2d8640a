"""MPRGP and MPPCG for box-constrained QPs, optionally preconditioned in face.

Every product with the Hessian goes through ``CountingOperator`` so the
reported ``hessian_mults`` is exact: one for the initial gradient, one per CG
or proportioning step and two per expansion step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .constraints import (
    ActiveFreeSplit,
    BoxConstraints,
    chopped_gradient,
    classify,
    feasible_step_and_limiters,
    free_gradient,
    project,
)
from .errors import DimensionMismatch, MaxIterationsExceeded, SingularCurvature
from .linalg import SparseSymMatrix, norm_estimate, spmv
from .preconditioners import FACE_MODES, INNER_KINDS, FaceStrategy
from .problems import QpProblem

EXPANSION_VARIANTS = ("fixed-step", "projected-cg")
GRADIENT_SOURCES = ("half-step", "iteration-start")
METHODS = {"mprgp": "fixed-step", "mppcg": "projected-cg"}


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs. ``abar=None`` resolves to ``abar_factor / norm_estimate(A)``."""

    gamma: float = 1.0
    abar: Optional[float] = None
    abar_factor: float = 1.9
    rtol: float = 1e-10
    atol: Optional[float] = None
    max_iter: Optional[int] = None
    expansion_variant: str = "fixed-step"
    face_mode: str = "none"
    inner_kind: str = "cholesky"
    expansion_gradient_source: str = "half-step"
    fixed_free: Optional[tuple] = None
    ssor_omega: float = 1.0
    ic0_shift: bool = False
    mppcg_safeguard: bool = True
    record_free_sets: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.abar is not None and not self.abar > 0:
            raise ValueError("abar must be positive")
        if not 0 < self.abar_factor < 2:
            raise ValueError("abar_factor must lie in (0, 2)")
        if self.rtol < 0 or (self.atol is not None and self.atol < 0):
            raise ValueError("tolerances must be non-negative")
        if self.rtol == 0 and self.atol == 0:
            raise ValueError("rtol and atol cannot both be zero")
        if self.expansion_variant not in EXPANSION_VARIANTS:
            raise ValueError(f"expansion_variant must be one of {EXPANSION_VARIANTS}")
        if self.face_mode not in FACE_MODES:
            raise ValueError(f"face_mode must be one of {FACE_MODES}")
        if self.inner_kind not in INNER_KINDS:
            raise ValueError(f"inner_kind must be one of {INNER_KINDS}")
        if self.expansion_gradient_source not in GRADIENT_SOURCES:
            raise ValueError(f"expansion_gradient_source must be one of {GRADIENT_SOURCES}")

    @classmethod
    def for_method(cls, method: str, **kwargs) -> "SolverConfig":
        """``for_method("mppcg", face_mode="approx", inner_kind="ic0")``."""
        try:
            variant = METHODS[method]
        except KeyError:
            raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}") from None
        return cls(expansion_variant=variant, **kwargs)

    @property
    def method(self) -> str:
        return "mprgp" if self.expansion_variant == "fixed-step" else "mppcg"


class CountingOperator:
    """The single chokepoint for Hessian products."""

    def __init__(self, A: SparseSymMatrix):
        self.A = A
        self.count = 0

    def __call__(self, v) -> np.ndarray:
        self.count += 1
        return spmv(self.A, v)


@dataclass
class SolverState:
    x: np.ndarray
    g: np.ndarray
    p: np.ndarray
    z: np.ndarray
    split: ActiveFreeSplit
    gf: np.ndarray
    gc: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class StepRecord:
    kind: str
    hessian_mults: int
    free_size: int
    cost: float
    alpha_cg: Optional[float] = None
    alpha_feas: Optional[float] = None
    alpha_sd: Optional[float] = None
    beta: Optional[float] = None
    fallback: bool = False


@dataclass
class SolveReport:
    x: np.ndarray
    converged: bool
    status: str
    cg_steps: int
    expansion_steps: int
    proportioning_steps: int
    hessian_mults: int
    preconditioner_applies: int
    face_rebuilds: int
    gp_norm: float
    tolerance: float
    abar: float
    initial_cost: float
    elapsed: float
    setup_time: float
    trace: list = field(default_factory=list)
    free_sets: Optional[list] = None

    @property
    def iterations(self) -> int:
        return self.cg_steps + self.expansion_steps + self.proportioning_steps

    def accounting_ok(self) -> bool:
        return self.hessian_mults == (1 + self.cg_steps + 2 * self.expansion_steps
                                      + self.proportioning_steps)

    def costs(self) -> np.ndarray:
        """Cost at ``x0`` followed by the cost after every step."""
        return np.array([self.initial_cost] + [r.cost for r in self.trace])

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "hess": self.hessian_mults,
            "cg": self.cg_steps,
            "exp": self.expansion_steps,
            "prop": self.proportioning_steps,
            "preconditioner_applies": self.preconditioner_applies,
            "face_rebuilds": self.face_rebuilds,
            "gp_norm": self.gp_norm,
            "tolerance": self.tolerance,
            "abar": self.abar,
            "elapsed": self.elapsed,
            "setup_time": self.setup_time,
        }


Preconditioner = Callable[[np.ndarray, ActiveFreeSplit], np.ndarray]


def cost(problem: QpProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise DimensionMismatch("point length does not match the problem")
    return float(0.5 * x @ spmv(problem.A, x) - x @ problem.b)


def _cost_from_gradient(x, g, b) -> float:
    # f = x^T (A x - b) / 2 - x^T b / 2; stand-alone step calls may omit b
    if b is None:
        return float("nan")
    return float(0.5 * (x @ g - x @ b))


def proportioning_test(gc, gf, gamma: float) -> bool:
    """True when ``||gc||^2 <= gamma^2 ||gf||^2`` (the iterate is proportional)."""
    return float(gc @ gc) <= gamma * gamma * float(gf @ gf)


def make_state(x, g, box: BoxConstraints, precond: Optional[Preconditioner] = None, k: int = 0):
    """Gradient splitting and preconditioned free gradient at ``x``; ``p`` starts as ``z``."""
    split = classify(x, box)
    gf = free_gradient(g, split)
    gc = chopped_gradient(g, split)
    z = gf if precond is None else precond(gf, split)
    return SolverState(x=x, g=g, p=z, z=z, split=split, gf=gf, gc=gc, k=k)


def _snap(x, box, lower_hits, upper_hits):
    x[lower_hits] = box.lower[lower_hits]
    x[upper_hits] = box.upper[upper_hits]
    return x


def _step_size_cg(state: SolverState, Ap, preconditioned: bool) -> tuple:
    pAp = float(state.p @ Ap)
    if not pAp > 0.0:
        raise SingularCurvature(f"p^T A p = {pAp:g} along the CG direction")
    num = float(state.g @ state.z) if preconditioned else float(state.g @ state.p)
    return num / pAp, pAp


def cg_step(state: SolverState, op: CountingOperator, box: BoxConstraints,
            precond: Optional[Preconditioner] = None, Ap=None, b=None):
    """Conjugate gradient step; returns ``(new_state, StepRecord)``."""
    if Ap is None:
        Ap = op(state.p)
    alpha, pAp = _step_size_cg(state, Ap, precond is not None)
    x = state.x - alpha * state.p
    alpha_feas, lo, up = feasible_step_and_limiters(state.x, state.p, box)
    if alpha == alpha_feas:
        _snap(x, box, lo, up)
    x = project(x, box)
    g = state.g - alpha * Ap
    new = make_state(x, g, box, precond, state.k + 1)
    beta = float(Ap @ new.z) / pAp
    new.p = new.z - beta * state.p
    rec = StepRecord("cg", 1, int(new.split.free.size), _cost_from_gradient(x, g, b),
                     alpha_cg=alpha, alpha_feas=alpha_feas, beta=beta)
    return new, rec


def expansion_step(state: SolverState, op: CountingOperator, box: BoxConstraints, b, abar: float,
                   precond: Optional[Preconditioner] = None, Ap=None,
                   gradient_source: str = "half-step"):
    """Maximal feasible CG step followed by a fixed-step projected free-gradient move."""
    if Ap is None:
        Ap = op(state.p)
    alpha_cg, _ = _step_size_cg(state, Ap, precond is not None)
    alpha_feas, lo, up = feasible_step_and_limiters(state.x, state.p, box)
    x_half = project(_snap(state.x - alpha_feas * state.p, box, lo, up), box)
    if gradient_source == "half-step":
        g_half = state.g - alpha_feas * Ap
        gf_src = free_gradient(g_half, classify(x_half, box))
    else:
        gf_src = state.gf
    x = project(x_half - abar * gf_src, box)
    g = op(x) - b
    new = make_state(x, g, box, precond, state.k + 1)
    rec = StepRecord("expansion", 2, int(new.split.free.size), _cost_from_gradient(x, g, b),
                     alpha_cg=alpha_cg, alpha_feas=alpha_feas)
    return new, rec


def projected_cg_expansion(state: SolverState, op: CountingOperator, box: BoxConstraints, b,
                           precond: Optional[Preconditioner] = None, Ap=None,
                           safeguard: bool = True):
    """Full CG step projected back onto the box.

    With ``safeguard`` a projected point that raises the cost is rejected in
    favour of the maximal feasible step, whose gradient is already known from
    ``Ap``; the step still costs two Hessian products.
    """
    if Ap is None:
        Ap = op(state.p)
    alpha_cg, _ = _step_size_cg(state, Ap, precond is not None)
    alpha_feas, lo, up = feasible_step_and_limiters(state.x, state.p, box)
    x = project(state.x - alpha_cg * state.p, box)
    g = op(x) - b
    f_new = _cost_from_gradient(x, g, b)
    fallback = safeguard and f_new > _cost_from_gradient(state.x, state.g, b)
    if fallback:
        x = project(_snap(state.x - alpha_feas * state.p, box, lo, up), box)
        g = state.g - alpha_feas * Ap
        f_new = _cost_from_gradient(x, g, b)
    new = make_state(x, g, box, precond, state.k + 1)
    rec = StepRecord("expansion", 2, int(new.split.free.size), f_new,
                     alpha_cg=alpha_cg, alpha_feas=alpha_feas, fallback=fallback)
    return new, rec


def proportioning_step(state: SolverState, op: CountingOperator, box: BoxConstraints,
                       precond: Optional[Preconditioner] = None, b=None):
    """Steepest descent along the chopped gradient, clipped to stay feasible."""
    gc = state.gc
    Agc = op(gc)
    curv = float(gc @ Agc)
    if not curv > 0.0:
        raise SingularCurvature(f"gc^T A gc = {curv:g} in the proportioning step")
    alpha_sd = float(state.g @ gc) / curv
    alpha_feas, lo, up = feasible_step_and_limiters(state.x, gc, box)
    x = state.x - min(alpha_sd, alpha_feas) * gc
    if alpha_feas < alpha_sd:
        alpha_sd = alpha_feas
        _snap(x, box, lo, up)
    x = project(x, box)
    g = state.g - alpha_sd * Agc
    new = make_state(x, g, box, precond, state.k + 1)
    rec = StepRecord("proportioning", 1, int(new.split.free.size),
                     _cost_from_gradient(x, g, b),
                     alpha_sd=alpha_sd, alpha_feas=alpha_feas)
    return new, rec


def make_preconditioner(A: SparseSymMatrix, cfg: SolverConfig) -> Optional[FaceStrategy]:
    if cfg.face_mode == "none":
        return None
    return FaceStrategy(A, cfg.face_mode, cfg.inner_kind, fixed_free=cfg.fixed_free,
                        omega=cfg.ssor_omega, ic0_shift=cfg.ic0_shift)


def resolve_abar(A: SparseSymMatrix, cfg: SolverConfig) -> float:
    return cfg.abar if cfg.abar is not None else cfg.abar_factor / norm_estimate(A)


def solve(problem: QpProblem, box: BoxConstraints, x0=None, cfg: SolverConfig = SolverConfig(),
          observer: Optional[Callable[[int, SolverState], None]] = None,
          strict: bool = False) -> SolveReport:
    """Run MPRGP (``fixed-step`` expansion) or MPPCG (``projected-cg``).

    ``x0`` defaults to the projection of zero; an infeasible ``x0`` is
    projected. ``observer(k, state)`` is called before every iteration.
    """
    A, b = problem.A, problem.b
    if box.n != problem.n:
        raise DimensionMismatch("box and problem dimensions differ")
    t0 = time.perf_counter()
    abar = resolve_abar(A, cfg)
    bnorm = float(np.linalg.norm(b))
    atol = cfg.atol if cfg.atol is not None else 1e-14 * (bnorm if bnorm > 0 else 1.0)
    tol = max(cfg.rtol * bnorm, atol)
    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * problem.n + 1000
    fixed = cfg.expansion_variant == "fixed-step"

    op = CountingOperator(A)
    precond = make_preconditioner(A, cfg)
    x = project(np.zeros(problem.n) if x0 is None else x0, box)
    g = op(x) - b
    state = make_state(x, g, box, precond)
    free_sets = [state.split.free] if cfg.record_free_sets else None
    counts = {"cg": 0, "expansion": 0, "proportioning": 0}
    trace = []
    initial_cost = _cost_from_gradient(x, g, b)
    converged = False

    for k in range(max_iter + 1):
        gp = state.gf + state.gc
        gp_norm = float(np.linalg.norm(gp))
        if gp_norm <= tol:
            converged = True
            break
        if k == max_iter:
            break
        if observer is not None:
            observer(k, state)
        if proportioning_test(state.gc, state.gf, cfg.gamma):
            Ap = op(state.p)
            alpha_cg, _ = _step_size_cg(state, Ap, precond is not None)
            alpha_feas = feasible_step_and_limiters(state.x, state.p, box)[0]
            if alpha_cg <= alpha_feas:
                state, rec = cg_step(state, op, box, precond, Ap=Ap, b=b)
            elif fixed:
                state, rec = expansion_step(state, op, box, b, abar, precond, Ap=Ap,
                                            gradient_source=cfg.expansion_gradient_source)
            else:
                state, rec = projected_cg_expansion(state, op, box, b, precond, Ap=Ap,
                                                    safeguard=cfg.mppcg_safeguard)
        else:
            state, rec = proportioning_step(state, op, box, precond, b=b)
        counts[rec.kind] += 1
        trace.append(rec)
        if free_sets is not None:
            free_sets.append(state.split.free)

    elapsed = time.perf_counter() - t0
    report = SolveReport(
        x=state.x,
        converged=converged,
        status="converged" if converged else "max_iter",
        cg_steps=counts["cg"],
        expansion_steps=counts["expansion"],
        proportioning_steps=counts["proportioning"],
        hessian_mults=op.count,
        preconditioner_applies=0 if precond is None else precond.applies,
        face_rebuilds=0 if precond is None else precond.rebuilds,
        gp_norm=gp_norm,
        tolerance=tol,
        abar=abar,
        initial_cost=initial_cost,
        elapsed=elapsed,
        setup_time=0.0 if precond is None else precond.setup_time,
        trace=trace,
        free_sets=free_sets,
    )
    if strict and not converged:
        raise MaxIterationsExceeded(f"no convergence in {max_iter} iterations", report)
    return report


def with_method(cfg: SolverConfig, method: str) -> SolverConfig:
    return replace(cfg, expansion_variant=METHODS[method])
