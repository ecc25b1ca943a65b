# cython: language_level=3
"""Compiled twins of the numpy_backend kernels (same signatures/semantics)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

NAME = "compiled"


def csr_dense_matmul(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                     const double[::1] data, const double[:, ::1] x):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t k = x.shape[1]
    out_arr = np.zeros((n_rows, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, col, c
    cdef double w
    for i in range(n_rows):
        for j in range(indptr[i], indptr[i + 1]):
            col = indices[j]
            w = data[j]
            for c in range(k):
                out[i, c] += w * x[col, c]
    return out_arr


def edge_propagate(const cnp.int64_t[::1] u, const cnp.int64_t[::1] v, const double[::1] w,
                   const double[::1] self_w, const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    cdef Py_ssize_t m = u.shape[0]
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, e, c, a, b
    cdef double we
    for i in range(n):
        for c in range(k):
            out[i, c] = self_w[i] * x[i, c]
    for e in range(m):
        a = u[e]
        b = v[e]
        we = w[e]
        for c in range(k):
            out[a, c] += we * x[b, c]
            out[b, c] += we * x[a, c]
    return out_arr


def edge_pair_dot(const cnp.int64_t[::1] u, const cnp.int64_t[::1] v,
                  const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t k = a.shape[1]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, c, i, j
    cdef double acc
    for e in range(m):
        i = u[e]
        j = v[e]
        acc = 0.0
        for c in range(k):
            acc += a[i, c] * b[j, c] + a[j, c] * b[i, c]
        out[e] = acc
    return out_arr


def jacobi_eigenvalues(a_in, double rel_tol=1e-10, int max_sweeps=60):
    # row-cyclic sweeps over the upper triangle only; the lower triangle is
    # never read after the initial copy
    a_arr = np.array(a_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = a_arr.shape[0]
    if a_arr.ndim != 2 or a_arr.shape[1] != n:
        raise ValueError("matrix must be square")
    if n <= 1:
        return a_arr.reshape(-1).copy()
    cdef double[:, ::1] a = a_arr
    cdef double norm = 0.0, off_sq, thresh, skip
    cdef Py_ssize_t i, p, q, sweep
    cdef double apq, app, aqq, theta, t, c, s, tmp1, tmp2
    for p in range(n):
        norm += a[p, p] * a[p, p]
        for q in range(p + 1, n):
            norm += 2.0 * a[p, q] * a[p, q]
    norm = sqrt(norm)
    if norm == 0.0:
        return np.zeros(n)
    thresh = rel_tol * norm
    # pivots below thresh/n can all be left in place: their total square
    # mass is under thresh**2, so skipping them cannot stall above thresh
    skip = thresh / n
    for sweep in range(max_sweeps):
        off_sq = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off_sq += 2.0 * a[p, q] * a[p, q]
        if sqrt(off_sq) <= thresh:
            return np.sort(np.diag(a_arr).copy())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= skip:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if fabs(theta) > 1e154:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                for i in range(p):
                    tmp1 = a[i, p]
                    tmp2 = a[i, q]
                    a[i, p] = c * tmp1 - s * tmp2
                    a[i, q] = s * tmp1 + c * tmp2
                for i in range(p + 1, q):
                    tmp1 = a[p, i]
                    tmp2 = a[i, q]
                    a[p, i] = c * tmp1 - s * tmp2
                    a[i, q] = s * tmp1 + c * tmp2
                for i in range(q + 1, n):
                    tmp1 = a[p, i]
                    tmp2 = a[q, i]
                    a[p, i] = c * tmp1 - s * tmp2
                    a[q, i] = s * tmp1 + c * tmp2
    raise RuntimeError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
