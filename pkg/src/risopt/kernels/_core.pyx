# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: the proximal-gradient velocity solve."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

COMPILED = True


def velocity_prox_grad(const double[::1] w, const double[::1] omega,
                       const double[::1] m, const double[:, ::1] a_mat,
                       double eps, double delta, double step, double tol,
                       int max_iter, v0=None):
    """Minimize sum omega_i |v_i| + (eps/2) v'Mv + (delta/2) v'Av - w'v.

    Same contract as the pure-Python fallback: returns (v, iterations,
    residual) with the residual measured as the V-norm of the last update.
    """
    cdef Py_ssize_t n = w.shape[0]
    cdef cnp.ndarray[double, ndim=1] v_arr = np.zeros(n) if v0 is None \
        else np.array(v0, dtype=np.float64)
    cdef double[::1] v = v_arr
    cdef cnp.ndarray[double, ndim=1] vn_arr = np.empty(n)
    cdef double[::1] v_new = vn_arr
    cdef double res = 0.0, g, u, t, d
    cdef Py_ssize_t i, j
    cdef int it
    for it in range(1, max_iter + 1):
        res = 0.0
        for i in range(n):
            g = eps * m[i] * v[i] - w[i]
            for j in range(n):
                g += delta * a_mat[i, j] * v[j]
            u = v[i] - step * g
            t = fabs(u) - step * omega[i]
            if t > 0.0:
                v_new[i] = t if u > 0.0 else -t
            else:
                v_new[i] = 0.0
        for i in range(n):
            d = v_new[i] - v[i]
            res += d * m[i] * d
            v[i] = v_new[i]
        res = sqrt(res)
        if res <= tol:
            return v_arr, it, res
    return v_arr, max_iter, res
