# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference numpy versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt, hypot

cnp.import_array()


def rho_hat_array(double[::1] zeta, double gamma, double b0, double rho_lo,
                  double rho_hi, double rtol, int maxiter):
    """Root of ``H(rho) = zeta/2`` on ``[rho_lo, rho_hi]`` for each entry."""
    cdef Py_ssize_t n = zeta.shape[0]
    cdef Py_ssize_t k
    cdef int it
    cdef double target, lo, hi, r, resid, deriv, trial
    cdef double expo = (gamma + 1.0) / (gamma - 1.0)
    cdef double inv_gm1 = 1.0 / (gamma - 1.0)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] rho = out
    for k in range(n):
        target = 0.5 * zeta[k]
        r = rho_hi
        if target <= 0.0:
            rho[k] = r
            continue
        lo = rho_lo
        hi = rho_hi
        for it in range(maxiter):
            resid = r * r * (b0 - pow(r, gamma - 1.0) * inv_gm1) - target
            if resid == 0.0:
                break
            deriv = 2.0 * r * b0 - expo * pow(r, gamma)
            if resid > 0.0:
                lo = r
            else:
                hi = r
            if deriv < 0.0:
                trial = r - resid / deriv
            else:
                trial = hi + 1.0
            if not (trial > lo and trial < hi):
                trial = 0.5 * (lo + hi)
            if fabs(trial - r) <= rtol * r or hi - lo <= rtol * r:
                r = trial
                break
            r = trial
        rho[k] = r
    return out


def assemble_interior(double[:, ::1] a_ss, double[:, ::1] a_st,
                      double[:, ::1] a_tt, double[:, ::1] a_s,
                      double[:, ::1] a_t, double hs, double ht):
    """COO triplets of the nine-point mapped operator at interior nodes."""
    cdef Py_ssize_t n_s = a_ss.shape[0]
    cdef Py_ssize_t n_t = a_ss.shape[1]
    cdef Py_ssize_t n_int = (n_s - 2) * (n_t - 2)
    cdef Py_ssize_t i, j, k, row, slot
    cdef double A, C, Bx, D, E
    rows_arr = np.empty(9 * n_int, dtype=np.int64)
    cols_arr = np.empty(9 * n_int, dtype=np.int64)
    vals_arr = np.empty(9 * n_int, dtype=np.float64)
    cdef long long[::1] rows = rows_arr
    cdef long long[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    # same block layout as the numpy version: offset-major, node-minor
    k = 0
    for i in range(1, n_s - 1):
        for j in range(1, n_t - 1):
            row = i * n_t + j
            A = a_ss[i, j] / (hs * hs)
            C = a_tt[i, j] / (ht * ht)
            Bx = a_st[i, j] / (2.0 * hs * ht)
            D = a_s[i, j] / (2.0 * hs)
            E = a_t[i, j] / (2.0 * ht)
            slot = k
            rows[slot] = row; cols[slot] = row; vals[slot] = -2.0 * A - 2.0 * C
            slot += n_int
            rows[slot] = row; cols[slot] = row + n_t; vals[slot] = A + D
            slot += n_int
            rows[slot] = row; cols[slot] = row - n_t; vals[slot] = A - D
            slot += n_int
            rows[slot] = row; cols[slot] = row + 1; vals[slot] = C + E
            slot += n_int
            rows[slot] = row; cols[slot] = row - 1; vals[slot] = C - E
            slot += n_int
            rows[slot] = row; cols[slot] = row + n_t + 1; vals[slot] = Bx
            slot += n_int
            rows[slot] = row; cols[slot] = row - n_t - 1; vals[slot] = Bx
            slot += n_int
            rows[slot] = row; cols[slot] = row + n_t - 1; vals[slot] = -Bx
            slot += n_int
            rows[slot] = row; cols[slot] = row - n_t + 1; vals[slot] = -Bx
            k += 1
    return rows_arr, cols_arr, vals_arr


cdef inline double _weight(double ya, double yb, double da, double db,
                           double p, double q) nogil:
    cdef double w = pow(1.0 + (ya if ya < yb else yb), p)
    if q != 0.0:
        w *= pow((da if da < db else db) / (1.0 + (ya if ya > yb else yb)), q)
    return w


def holder_all_pairs(double[::1] values, double[::1] x1, double[::1] x2,
                     double[::1] delta, double alpha, double p, double q,
                     int block=512):
    """Weighted Hoelder quotient maximised over every node pair."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t a, b
    cdef double best = 0.0, dist, quot
    with nogil:
        for a in range(n):
            for b in range(a + 1, n):
                dist = hypot(x1[a] - x1[b], x2[a] - x2[b])
                if dist > 0.0:
                    quot = (_weight(x2[a], x2[b], delta[a], delta[b], p, q)
                            * fabs(values[a] - values[b]) / pow(dist, alpha))
                    if quot > best:
                        best = quot
    return best


def holder_index_pairs(double[::1] values, double[::1] x1, double[::1] x2,
                       double[::1] delta, long long[::1] first,
                       long long[::1] second, double alpha, double p, double q):
    """Weighted Hoelder quotient maximised over explicit index pairs."""
    cdef Py_ssize_t m = first.shape[0]
    cdef Py_ssize_t k, a, b
    cdef double best = 0.0, dist, quot
    with nogil:
        for k in range(m):
            a = first[k]
            b = second[k]
            dist = hypot(x1[a] - x1[b], x2[a] - x2[b])
            if dist > 0.0:
                quot = (_weight(x2[a], x2[b], delta[a], delta[b], p, q)
                        * fabs(values[a] - values[b]) / pow(dist, alpha))
                if quot > best:
                    best = quot
    return best
