"""Pure-numpy twins of the kernels in ``_numba.py`` (same signatures and semantics)."""

import math

import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n).astype(float)


def ic0_factor(indptr, indices, data):
    n = indptr.shape[0] - 1
    L = data.astype(float).copy()
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        cols_i = indices[start:end - 1]
        for off in range(end - 1 - start):
            kk = start + off
            k = indices[kk]
            ks, ke = indptr[k], indptr[k + 1] - 1
            _, pi, pk = np.intersect1d(cols_i[:off], indices[ks:ke],
                                       assume_unique=True, return_indices=True)
            s = L[kk] - np.dot(L[start + pi], L[ks + pk])
            L[kk] = s / L[ke]
        d = L[end - 1] - np.dot(L[start:end - 1], L[start:end - 1])
        if not d > 0.0:
            return L, i
        L[end - 1] = math.sqrt(d)
    return L, -1


def lower_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    y = np.empty(n)
    for i in range(n):
        s, last = indptr[i], indptr[i + 1] - 1
        y[i] = (b[i] - np.dot(data[s:last], y[indices[s:last]])) / data[last]
    return y


def lower_transpose_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    z = np.array(b, dtype=float)
    for i in range(n - 1, -1, -1):
        s, last = indptr[i], indptr[i + 1] - 1
        z[i] /= data[last]
        z[indices[s:last]] -= data[s:last] * z[i]
    return z


def dense_cholesky(M):
    n = M.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        if i:
            # forward substitution for row i against the already-built rows
            row = L[i]
            for j in range(i):
                row[j] = (M[i, j] - np.dot(row[:j], L[j, :j])) / L[j, j]
        d = M[i, i] - np.dot(L[i, :i], L[i, :i])
        if not d > 0.0:
            return L, i
        L[i, i] = math.sqrt(d)
    return L, -1


def jacobi_eigenvalues(M, rel_tol, max_sweeps):
    a = np.array(M, dtype=float)
    n = a.shape[0]
    target = rel_tol * rel_tol * np.sum(a * a)

    def off2():
        return np.sum(a * a) - np.sum(np.diag(a) ** 2)

    for sweep in range(max_sweeps):
        if off2() <= target:
            return np.diag(a).copy(), sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
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
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
    if off2() <= target:
        return np.diag(a).copy(), max_sweeps
    return np.diag(a).copy(), -1
