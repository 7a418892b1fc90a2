# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical core; see ``_core_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, M_PI
from scipy.linalg.cython_blas cimport daxpy, ddot, dgemm

cnp.import_array()


def lag_table(mus, sigmas, Py_ssize_t n):
    cdef double[::1] mu = np.ascontiguousarray(mus, dtype=np.float64)
    cdef double[::1] sg = np.ascontiguousarray(sigmas, dtype=np.float64)
    cdef Py_ssize_t m = mu.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, t
    cdef double a, w, tt
    for i in range(m):
        a = -2.0 * M_PI * M_PI * sg[i] * sg[i]
        w = 2.0 * M_PI * mu[i]
        for t in range(n):
            tt = <double>t
            o[i, t] = exp(a * tt * tt) * cos(w * tt)
    return out


def toeplitz_stack(lags):
    cdef double[:, ::1] lg = np.ascontiguousarray(lags, dtype=np.float64)
    cdef Py_ssize_t m = lg.shape[0]
    cdef Py_ssize_t n = lg.shape[1]
    out = np.empty((m, n, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, r, c
    # row-wise fill keeps every write contiguous
    for i in range(m):
        for r in range(n):
            for c in range(r):
                o[i, r, c] = lg[i, r - c]
            for c in range(r, n):
                o[i, r, c] = lg[i, c - r]
    return out


def gauss_seidel_sweep(P, Y, alpha):
    cdef Py_ssize_t m = P.shape[0]
    cdef double[:, ::1] pf = np.ascontiguousarray(P, dtype=np.float64).reshape(m, -1)
    if not (Y.flags.c_contiguous and Y.dtype == np.float64):
        raise ValueError("Y must be a C-contiguous float64 array")
    cdef double[::1] yf = Y.reshape(-1)
    out = np.array(alpha, dtype=np.float64, copy=True)
    cdef double[::1] a = out
    cdef int N = <int>pf.shape[1]
    cdef int one = 1
    cdef Py_ssize_t i
    cdef double num, den, new, delta
    if N == 0:
        return out
    for i in range(m):
        den = ddot(&N, &pf[i, 0], &one, &pf[i, 0], &one)
        if den <= 0.0:
            continue
        num = ddot(&N, &yf[0], &one, &pf[i, 0], &one)
        new = a[i] + num / den
        if new < 0.0:
            new = 0.0
        delta = new - a[i]
        if delta != 0.0:
            delta = -delta
            daxpy(&N, &delta, &pf[i, 0], &one, &yf[0], &one)
        a[i] = new
    return out


def gram_sweep(K, L, ranks, S2, Z, den, alpha):
    cdef double[:, :, ::1] kk = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[:, :, ::1] ll = np.ascontiguousarray(L, dtype=np.float64)
    cdef cnp.intp_t[::1] rk = np.ascontiguousarray(ranks, dtype=np.intp)
    cdef double[:, ::1] s2 = np.ascontiguousarray(S2, dtype=np.float64)
    if not (Z.flags.c_contiguous and Z.dtype == np.float64):
        raise ValueError("Z must be a C-contiguous float64 array")
    cdef double[:, ::1] z = Z
    cdef double[::1] dn = np.ascontiguousarray(den, dtype=np.float64)
    out = np.array(alpha, dtype=np.float64, copy=True)
    cdef double[::1] a = out
    cdef Py_ssize_t m = kk.shape[0]
    cdef int n = <int>kk.shape[1]
    cdef int rmax = <int>ll.shape[2]
    cdef int N = n * n
    cdef int one = 1
    cdef int r
    cdef double zero = 0.0, unit = 1.0
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double[:, ::1] tmp = np.empty((n, max(rmax, 1)), dtype=np.float64)
    cdef Py_ssize_t i
    cdef double num, new, delta
    if n == 0:
        return out
    for i in range(m):
        if dn[i] <= 0.0:
            continue
        num = ddot(&N, &z[0, 0], &one, &kk[i, 0, 0], &one)
        new = a[i] + num / dn[i]
        if new < 0.0:
            new = 0.0
        delta = new - a[i]
        r = <int>rk[i]
        if delta != 0.0 and r > 0:
            delta = -delta
            # column-major views: A = L_i^T (r x n, ld rmax), T = A S2^T = (S2 L_i)^T,
            # then Z^T += delta * A^T T, i.e. Z += delta * S2 L_i L_i^T
            dgemm(&tn, &tn, &r, &n, &n, &unit, &ll[i, 0, 0], &rmax, &s2[0, 0], &n,
                  &zero, &tmp[0, 0], &r)
            dgemm(&tt, &tn, &n, &n, &r, &delta, &ll[i, 0, 0], &rmax, &tmp[0, 0], &r,
                  &unit, &z[0, 0], &n)
        a[i] = new
    return out


def segment_power(segments, freqs):
    cdef double[:, ::1] seg = np.ascontiguousarray(segments, dtype=np.float64)
    cdef double[::1] fr = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef Py_ssize_t L = seg.shape[0]
    cdef Py_ssize_t D = seg.shape[1]
    cdef Py_ssize_t F = fr.shape[0]
    out = np.empty((L, F), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] cs = np.empty(D, dtype=np.float64)
    cdef double[::1] sn = np.empty(D, dtype=np.float64)
    cdef Py_ssize_t l, j, t
    cdef double w, re, im
    for j in range(F):
        w = 2.0 * M_PI * fr[j]
        for t in range(D):
            cs[t] = cos(w * (t + 1))
            sn[t] = sin(w * (t + 1))
        for l in range(L):
            re = 0.0
            im = 0.0
            for t in range(D):
                re += seg[l, t] * cs[t]
                im += seg[l, t] * sn[t]
            o[l, j] = re * re + im * im
    return out
