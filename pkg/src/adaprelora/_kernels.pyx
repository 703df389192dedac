# cython: language_level=3
"""Compiled kernels; same signatures and semantics as ``_kernels_py``.

Loops are written for the small-rank regime (r of order 1-64) where the
NumPy version is dominated by per-call overhead. All loops run without the
GIL so grid cells in the harness can overlap.
"""
import numpy as np

BACKEND = "cython"


def accumulate_stats(const double[:, :] G, const double[:] l, const double[:] r,
                     double decay_row, double decay_col):
    cdef Py_ssize_t m = G.shape[0], n = G.shape[1], i, j
    l_out = np.empty(m)
    r_out = np.zeros(n)
    cdef double[::1] lo = l_out
    cdef double[::1] ro = r_out
    cdef double g2, acc
    with nogil:
        for i in range(m):
            acc = 0.0
            for j in range(n):
                g2 = G[i, j] * G[i, j]
                acc = acc + g2
                ro[j] += g2
            lo[i] = decay_row * l[i] + (1.0 - decay_row) * acc
        for j in range(n):
            ro[j] = decay_col * r[j] + (1.0 - decay_col) * ro[j]
    return l_out, r_out


def scale_outer(const double[:, :] Y, const double[:] a, const double[:] b):
    cdef Py_ssize_t m = Y.shape[0], n = Y.shape[1], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                o[i, j] = a[i] * Y[i, j] * b[j]
    return out


def unscale_outer(const double[:, :] K, const double[:] a, const double[:] b):
    cdef Py_ssize_t m = K.shape[0], n = K.shape[1], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                o[i, j] = K[i, j] / (a[i] * b[j])
    return out


def weighted_inner(const double[:, :] Y, const double[:, :] Z,
                   const double[:] a, const double[:] b):
    cdef Py_ssize_t m = Y.shape[0], n = Y.shape[1], i, j
    cdef double acc = 0.0, row
    with nogil:
        for i in range(m):
            row = 0.0
            for j in range(n):
                row = row + Y[i, j] * Z[i, j] * b[j]
            acc = acc + a[i] * row
    return acc


# Above this many multiply-adds the products go to BLAS; the fused loop only
# wins while call overhead dominates.
cdef Py_ssize_t GEMM_CUTOFF = 2048


def factor_grads(G, B, A):
    G = np.asarray(G, dtype=np.float64)
    if G.shape[0] * G.shape[1] * B.shape[1] > GEMM_CUTOFF:
        return G @ A.T, B.T @ G
    return _factor_grads_small(G, B, A)


cdef tuple _factor_grads_small(const double[:, :] G, const double[:, :] B, const double[:, :] A):
    cdef Py_ssize_t m = G.shape[0], n = G.shape[1], r = B.shape[1], i, j, p
    GB = np.zeros((m, r))
    GA = np.zeros((r, n))
    cdef double[:, ::1] gb = GB
    cdef double[:, ::1] ga = GA
    cdef double g
    with nogil:
        for i in range(m):
            for j in range(n):
                g = G[i, j]
                for p in range(r):
                    gb[i, p] += g * A[p, j]
                    ga[p, j] += B[i, p] * g
    return GB, GA


cdef int _cholesky(double[:, ::1] S) noexcept nogil:
    # In-place lower Cholesky; upper triangle is left untouched.
    cdef Py_ssize_t k = S.shape[0], i, j, t
    cdef double s
    for j in range(k):
        s = S[j, j]
        for t in range(j):
            s -= S[j, t] * S[j, t]
        if s <= 0.0:
            return -1
        S[j, j] = s ** 0.5
        for i in range(j + 1, k):
            s = S[i, j]
            for t in range(j):
                s -= S[i, t] * S[j, t]
            S[i, j] = s / S[j, j]
    return 0


cdef void _solve_rows(double[:, ::1] C, double[:, ::1] X) noexcept nogil:
    # Each row x of X is replaced by S^{-1} x, S = C C^T.
    cdef Py_ssize_t k = C.shape[0], rows = X.shape[0], q, i, t
    cdef double s
    for q in range(rows):
        for i in range(k):
            s = X[q, i]
            for t in range(i):
                s -= C[i, t] * X[q, t]
            X[q, i] = s / C[i, i]
        for i in range(k - 1, -1, -1):
            s = X[q, i]
            for t in range(i + 1, k):
                s -= C[t, i] * X[q, t]
            X[q, i] = s / C[i, i]


cdef void _solve_cols(double[:, ::1] C, double[:, ::1] X) noexcept nogil:
    # Each column x of X is replaced by S^{-1} x, S = C C^T.
    cdef Py_ssize_t k = C.shape[0], cols = X.shape[1], q, i, t
    cdef double s
    for q in range(cols):
        for i in range(k):
            s = X[i, q]
            for t in range(i):
                s -= C[i, t] * X[t, q]
            X[i, q] = s / C[i, i]
        for i in range(k - 1, -1, -1):
            s = X[i, q]
            for t in range(i + 1, k):
                s -= C[t, i] * X[t, q]
            X[i, q] = s / C[i, i]


cdef double _cond_estimate(double[:, ::1] C) noexcept nogil:
    cdef Py_ssize_t k = C.shape[0], i
    cdef double lo = C[0, 0], hi = C[0, 0]
    for i in range(1, k):
        if C[i, i] < lo:
            lo = C[i, i]
        if C[i, i] > hi:
            hi = C[i, i]
    return (hi / lo) * (hi / lo)


def closed_form(const double[:, :] B, const double[:, :] A,
                const double[:, :] GB, const double[:, :] GA,
                const double[:] lh, const double[:] rh, double eps):
    cdef Py_ssize_t m = B.shape[0], r = B.shape[1], n = A.shape[1]
    cdef Py_ssize_t i, j, p, q
    cdef double s
    cdef int info_b, info_a

    Sb_arr = np.empty((r, r))
    Sa_arr = np.empty((r, r))
    T_arr = np.empty((m, r))
    U_arr = np.empty((r, n))
    C_arr = np.empty((r, r))
    D_arr = np.empty((r, r))
    dB_arr = np.empty((m, r))
    dA_arr = np.empty((r, n))
    cdef double[:, ::1] Sb = Sb_arr
    cdef double[:, ::1] Sa = Sa_arr
    cdef double[:, ::1] T = T_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] D = D_arr
    cdef double[:, ::1] dB = dB_arr
    cdef double[:, ::1] dA = dA_arr
    cdef double cond_b = 0.0, cond_a = 0.0

    with nogil:
        for p in range(r):
            for q in range(p + 1):
                s = 0.0
                for i in range(m):
                    s = s + B[i, p] * lh[i] * B[i, q]
                Sb[p, q] = s
                Sb[q, p] = s
                s = 0.0
                for j in range(n):
                    s = s + A[p, j] * rh[j] * A[q, j]
                Sa[p, q] = s
                Sa[q, p] = s
            Sb[p, p] += eps
            Sa[p, p] += eps
        info_b = _cholesky(Sb)
        info_a = _cholesky(Sa)

    if info_b != 0 or info_a != 0:
        raise np.linalg.LinAlgError("regularized Gram matrix is not positive definite")

    with nogil:
        cond_b = _cond_estimate(Sb)
        cond_a = _cond_estimate(Sa)

        # T = L^{-1/2} G_B S_A^{-1}
        for i in range(m):
            for p in range(r):
                T[i, p] = GB[i, p] / lh[i]
        _solve_rows(Sa, T)
        # C = S_B^{-1} B^T L^{1/2} T ; dB = T - B C / 2
        for p in range(r):
            for q in range(r):
                s = 0.0
                for i in range(m):
                    s = s + B[i, p] * lh[i] * T[i, q]
                C[p, q] = s
        _solve_cols(Sb, C)
        for i in range(m):
            for q in range(r):
                s = 0.0
                for p in range(r):
                    s = s + B[i, p] * C[p, q]
                dB[i, q] = T[i, q] - 0.5 * s

        # U = S_B^{-1} G_A R^{-1/2}
        for p in range(r):
            for j in range(n):
                U[p, j] = GA[p, j]
        _solve_cols(Sb, U)
        for p in range(r):
            for j in range(n):
                U[p, j] = U[p, j] / rh[j]
        # D = U R^{1/2} A^T S_A^{-1} ; dA = U - D A / 2
        for p in range(r):
            for q in range(r):
                s = 0.0
                for j in range(n):
                    s = s + U[p, j] * rh[j] * A[q, j]
                D[p, q] = s
        _solve_rows(Sa, D)
        for p in range(r):
            for j in range(n):
                s = 0.0
                for q in range(r):
                    s = s + D[p, q] * A[q, j]
                dA[p, j] = U[p, j] - 0.5 * s

    return dB_arr, dA_arr, cond_b, cond_a
