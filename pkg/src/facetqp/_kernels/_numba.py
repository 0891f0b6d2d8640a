"""Numba-compiled hot loops.

Every function here has a twin with the same signature in ``_numpy.py``.
Status-returning kernels report failure through a negative integer instead of
raising, because exceptions from nopython code lose their payload.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return y


@njit(cache=True)
def ic0_factor(indptr, indices, data):
    """Zero-fill incomplete Cholesky on a lower-triangular CSR pattern.

    Each row must end with its diagonal entry. Returns ``(L_data, status)``
    where status is -1 on success or the index of the offending pivot row.
    """
    n = indptr.shape[0] - 1
    L = data.copy()
    for i in range(n):
        start = indptr[i]
        end = indptr[i + 1]
        for kk in range(start, end - 1):
            k = indices[kk]
            # sparse dot of row i and row k over columns < k
            s = L[kk]
            p = start
            q = indptr[k]
            qend = indptr[k + 1] - 1
            while p < kk and q < qend:
                cp = indices[p]
                cq = indices[q]
                if cp == cq:
                    s -= L[p] * L[q]
                    p += 1
                    q += 1
                elif cp < cq:
                    p += 1
                else:
                    q += 1
            L[kk] = s / L[qend]
        d = L[end - 1]
        for kk in range(start, end - 1):
            d -= L[kk] * L[kk]
        if not d > 0.0:
            return L, i
        L[end - 1] = math.sqrt(d)
    return L, -1


@njit(cache=True)
def lower_solve(indptr, indices, data, b):
    # rows end with the diagonal
    n = indptr.shape[0] - 1
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        last = indptr[i + 1] - 1
        for k in range(indptr[i], last):
            s -= data[k] * y[indices[k]]
        y[i] = s / data[last]
    return y


@njit(cache=True)
def lower_transpose_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    z = b.copy()
    for i in range(n - 1, -1, -1):
        last = indptr[i + 1] - 1
        zi = z[i] / data[last]
        z[i] = zi
        for k in range(indptr[i], last):
            z[indices[k]] -= data[k] * zi
    return z


@njit(cache=True)
def dense_cholesky(M):
    """Row-oriented Cholesky. Returns ``(L, status)``, status as in ``ic0_factor``."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
        d = M[i, i]
        for k in range(i):
            d -= L[i, k] * L[i, k]
        if not d > 0.0:
            return L, i
        L[i, i] = math.sqrt(d)
    return L, -1


@njit(cache=True)
def jacobi_eigenvalues(M, rel_tol, max_sweeps):
    """Cyclic-by-row Jacobi. Returns ``(diag, sweeps)``; sweeps = -1 if not converged."""
    a = M.copy()
    n = a.shape[0]
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j] * a[i, j]
    target = rel_tol * rel_tol * fro2
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if off <= target:
            return np.diag(a).copy(), sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) * 1e18 < abs(diff):
                    # rotation angle below resolution: tan(theta) ~ apq / diff
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + math.hypot(1.0, tau))
                    else:
                        t = -1.0 / (-tau + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    off = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                off += a[i, j] * a[i, j]
    if off <= target:
        return np.diag(a).copy(), max_sweeps
    return np.diag(a).copy(), -1
