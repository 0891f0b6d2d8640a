"""Matrix Market (symmetric coordinate) and plain-text vector files."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import SparseSymMatrix


def write_matrix(path, A: SparseSymMatrix, comment: str = "") -> None:
    # scipy writes only the lower triangle when symmetry="symmetric"
    scipy.io.mmwrite(str(path), sp.coo_matrix(A.to_scipy()), comment=comment,
                     field="real", symmetry="symmetric", precision=17)


def read_matrix(path) -> SparseSymMatrix:
    m = scipy.io.mmread(str(path))
    if not sp.issparse(m):
        m = sp.csr_matrix(m)
    return SparseSymMatrix.from_scipy(m)


def write_vector(path, v) -> None:
    with open(path, "w") as fh:
        for value in np.asarray(v, dtype=float):
            fh.write(f"{float(value)!r}\n")


def read_vector(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for line in fh:
            token = line.strip()
            if token and not token.startswith("#"):
                values.append(float(token))
    return np.array(values, dtype=float)


def write_problem(prefix, problem, box) -> dict:
    """Dump ``<prefix>.mtx``, ``<prefix>_rhs.txt``, ``<prefix>_lower.txt``, ``<prefix>_upper.txt``."""
    paths = {
        "matrix": f"{prefix}.mtx",
        "rhs": f"{prefix}_rhs.txt",
        "lower": f"{prefix}_lower.txt",
        "upper": f"{prefix}_upper.txt",
    }
    write_matrix(paths["matrix"], problem.A, comment=problem.name)
    write_vector(paths["rhs"], problem.b)
    write_vector(paths["lower"], box.lower)
    write_vector(paths["upper"], box.upper)
    return paths
