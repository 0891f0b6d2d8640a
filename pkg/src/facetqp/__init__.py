"""Box-constrained QP solvers (MPRGP, MPPCG) with preconditioning in face."""

from .constraints import ActiveFreeSplit, BoxConstraints, classify, project
from .linalg import SparseSymMatrix
from .oracle import brute_force_boxqp
from .problems import QpProblem, journal_bearing, obstacle_laplace_2d, random_box_qp
from .solvers import SolveReport, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "ActiveFreeSplit",
    "BoxConstraints",
    "QpProblem",
    "SolveReport",
    "SolverConfig",
    "SparseSymMatrix",
    "brute_force_boxqp",
    "classify",
    "journal_bearing",
    "obstacle_laplace_2d",
    "project",
    "random_box_qp",
    "solve",
]
