"""Benchmark problem generators returning ``(QpProblem, BoxConstraints)`` pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .constraints import BoxConstraints
from .errors import DimensionMismatch
from .linalg import SparseSymMatrix


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Minimize ``0.5 x^T A x - x^T b``."""

    A: SparseSymMatrix
    b: np.ndarray
    name: str = "qp"

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.shape != (self.A.n,):
            raise DimensionMismatch(f"rhs of shape {b.shape} for matrix of dimension {self.A.n}")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.n


def journal_bearing(nx: int, ny: int, eccentricity: float = 0.1, half_width: float = 10.0):
    """Pressure in a journal bearing, P1 elements on a two-triangle-per-cell grid.

    Domain ``(0, 2*pi) x (0, 2*half_width)`` with zero boundary values and
    ``nx * ny`` interior nodes numbered row-major with the first coordinate
    fastest. Each triangle's coefficient ``(1 + e cos t)^3`` and load
    ``e sin t`` are sampled at its centroid. Bounds: ``x >= 0``.
    """
    if nx < 2 or ny < 2:
        raise ValueError("journal_bearing needs nx, ny >= 2")
    if not 0.0 < eccentricity < 1.0:
        raise ValueError("eccentricity must lie in (0, 1)")
    if half_width <= 0.0:
        raise ValueError("half_width must be positive")
    hx = 2.0 * np.pi / (nx + 1)
    hy = 2.0 * half_width / (ny + 1)
    area = 0.5 * hx * hy
    n = nx * ny

    # grid vertices (i, j), 0..nx+1 by 0..ny+1; interior ones get dof numbers
    dof = -np.ones((nx + 2, ny + 2), dtype=np.int64)
    dof[1:-1, 1:-1] = (np.arange(ny)[None, :] * nx + np.arange(nx)[:, None])

    ci, cj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    ci = ci.ravel()
    cj = cj.ravel()
    # lower triangle: (i,j) (i+1,j) (i,j+1); upper: (i+1,j+1) (i,j+1) (i+1,j)
    # both are right triangles, so the hypotenuse coupling vanishes exactly
    lower_centroid = (ci + 1.0 / 3.0) * hx
    upper_centroid = (ci + 2.0 / 3.0) * hx
    wq_lo = (1.0 + eccentricity * np.cos(lower_centroid)) ** 3
    wq_up = (1.0 + eccentricity * np.cos(upper_centroid)) ** 3
    wl_lo = eccentricity * np.sin(lower_centroid)
    wl_up = eccentricity * np.sin(upper_centroid)

    kx = 0.5 * hy / hx
    ky = 0.5 * hx / hy
    rows, cols, vals = [], [], []

    def add(tri_corner, tri_x, tri_y, w):
        # corner is the right-angle vertex; tri_x/tri_y its neighbours along each axis
        for a, b_, k in ((tri_corner, tri_x, kx), (tri_corner, tri_y, ky)):
            coeff = w * k
            for p, q, v in ((a, a, coeff), (b_, b_, coeff), (a, b_, -coeff), (b_, a, -coeff)):
                mask = (p >= 0) & (q >= 0)
                rows.append(p[mask])
                cols.append(q[mask])
                vals.append(v[mask])

    add(dof[ci, cj], dof[ci + 1, cj], dof[ci, cj + 1], wq_lo)
    add(dof[ci + 1, cj + 1], dof[ci, cj + 1], dof[ci + 1, cj], wq_up)

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    # exact symmetry regardless of summation order
    upper = sp.triu(A, k=1)
    A = (sp.tril(upper.T, k=-1) + upper + sp.diags(A.diagonal())).tocsr()

    b = np.zeros(n)
    for tri, wl in (((dof[ci, cj], dof[ci + 1, cj], dof[ci, cj + 1]), wl_lo),
                    ((dof[ci + 1, cj + 1], dof[ci, cj + 1], dof[ci + 1, cj]), wl_up)):
        for v in tri:
            mask = v >= 0
            np.add.at(b, v[mask], wl[mask] * area / 3.0)

    problem = QpProblem(SparseSymMatrix.from_scipy(A), b, f"jbearing_{nx}x{ny}")
    box = BoxConstraints(np.zeros(n), np.full(n, np.inf))
    return problem, box


def journal_bearing_energy(nx, ny, v, eccentricity=0.1, half_width=10.0):
    """Discrete energy summed triangle by triangle (independent of the assembly above)."""
    v = np.asarray(v, dtype=float)
    hx = 2.0 * np.pi / (nx + 1)
    hy = 2.0 * half_width / (ny + 1)
    area = 0.5 * hx * hy
    grid = np.zeros((nx + 2, ny + 2))
    grid[1:-1, 1:-1] = v.reshape(ny, nx).T
    total = 0.0
    for i in range(nx + 1):
        for j in range(ny + 1):
            for corner, xn, yn, cx in (
                ((i, j), (i + 1, j), (i, j + 1), (i + 1.0 / 3.0) * hx),
                ((i + 1, j + 1), (i, j + 1), (i + 1, j), (i + 2.0 / 3.0) * hx),
            ):
                dx = (grid[xn] - grid[corner]) / hx
                dy = (grid[yn] - grid[corner]) / hy
                wq = (1.0 + eccentricity * np.cos(cx)) ** 3
                wl = eccentricity * np.sin(cx)
                mean = (grid[corner] + grid[xn] + grid[yn]) / 3.0
                total += area * (0.5 * wq * (dx * dx + dy * dy) - wl * mean)
    return total


def obstacle_laplace_2d(n: int, load: float = 1.0, obstacle_height: float = np.inf):
    """5-point Laplacian on an ``n x n`` interior grid with an upper obstacle."""
    if n < 2:
        raise ValueError("obstacle_laplace_2d needs n >= 2")
    h = 1.0 / (n + 1)
    t = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    A = sp.kronsum(t, t, format="csr")
    N = n * n
    b = np.full(N, load * h * h)
    problem = QpProblem(SparseSymMatrix.from_scipy(A), b, f"obstacle_{n}x{n}")
    box = BoxConstraints(np.full(N, -np.inf), np.full(N, float(obstacle_height)))
    return problem, box


def random_box_qp(n: int, seed: int):
    """Seeded dense SPD box QP with spectrum log-uniform in ``[1, 1e3]``.

    Draws come from ``numpy.random.default_rng(seed)`` (PCG64), so a seed
    reproduces the problem bit for bit. Returns ``(problem, box, x0)`` with
    ``x0`` strictly inside the box.
    """
    if not 1 <= n <= 64:
        raise ValueError("random_box_qp supports 1 <= n <= 64")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    lam = 10.0 ** rng.uniform(0.0, 3.0, n)
    dense = (q * lam) @ q.T
    dense = 0.5 * (dense + dense.T)
    center = rng.uniform(-1.0, 1.0, n)
    lower = center - rng.uniform(0.1, 1.0, n)
    upper = center + rng.uniform(0.1, 1.0, n)
    which = rng.uniform(size=(2, n))
    lower[which[0] < 0.15] = -np.inf
    upper[which[1] < 0.15] = np.inf
    target = center + rng.uniform(-2.0, 2.0, n)
    b = dense @ target
    x0 = center.copy()
    A = SparseSymMatrix.from_dense(dense)
    return QpProblem(A, b, f"random_{n}_{seed}"), BoxConstraints(lower, upper), x0
