# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (same signatures as _pykernels)."""
import numpy as np
from libc.math cimport sqrt


def svk_energy(F, mu, lam):
    cdef const double[:, :, ::1] f = np.ascontiguousarray(F, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], k, i, j, a
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double e[3][3]
    cdef double s, tr, nrm
    for k in range(n):
        for i in range(3):
            for j in range(i, 3):
                s = 0.0
                for a in range(3):
                    s += f[k, a, i] * f[k, a, j]
                if i == j:
                    s -= 1.0
                e[i][j] = 0.5 * s
                e[j][i] = 0.5 * s
        tr = e[0][0] + e[1][1] + e[2][2]
        nrm = 0.0
        for i in range(3):
            for j in range(3):
                nrm += e[i][j] * e[i][j]
        o[k] = m[k] * nrm + 0.5 * l[k] * tr * tr
    return out


def quad_form(Q, v):
    cdef const double[:, :, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0], d = q.shape[1], k, i, j
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double s, r
    for k in range(n):
        s = 0.0
        for i in range(d):
            r = 0.0
            for j in range(d):
                r += q[k, i, j] * x[k, j]
            s += x[k, i] * r
        o[k] = s
    return out


def schur(Q, keep, elim):
    cdef const double[:, :, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const long[::1] kp = np.ascontiguousarray(keep, dtype=np.int64)
    cdef const long[::1] el = np.ascontiguousarray(elim, dtype=np.int64)
    cdef Py_ssize_t n = q.shape[0], nk = kp.shape[0], ne = el.shape[0]
    cdef Py_ssize_t k, i, j, a
    out = np.empty((n, nk, nk))
    okarr = np.ones(n, dtype=bool)
    cdef double[:, :, ::1] o = out
    cdef double[:, ::1] L = np.empty((ne, ne))
    cdef double[:, ::1] X = np.empty((ne, nk))
    cdef double s
    cdef bint ok
    for k in range(n):
        # Cholesky of the eliminated block
        ok = True
        for i in range(ne):
            for j in range(i + 1):
                s = q[k, el[i], el[j]]
                for a in range(j):
                    s -= L[i, a] * L[j, a]
                if i == j:
                    if s <= 0.0:
                        ok = False
                        s = 1.0
                    L[i, i] = sqrt(s)
                else:
                    L[i, j] = s / L[j, j]
        if not ok:
            okarr[k] = False
            for i in range(ne):
                for j in range(ne):
                    L[i, j] = 1.0 if i == j else 0.0
        # forward solve L X = Q_ek
        for j in range(nk):
            for i in range(ne):
                s = q[k, el[i], kp[j]]
                for a in range(i):
                    s -= L[i, a] * X[a, j]
                X[i, j] = s / L[i, i]
        for i in range(nk):
            for j in range(i, nk):
                s = q[k, kp[i], kp[j]]
                for a in range(ne):
                    s -= X[a, i] * X[a, j]
                o[k, i, j] = s
                o[k, j, i] = s
    return out, okarr
