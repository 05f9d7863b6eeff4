# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled projected-SGD loop. Mirrors ``robustreg._sgd_py.sgd_path``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def sgd_path(const double[:, ::1] X, const double[::1] y, const double[::1] center,
             bint streaming, double R, double D, double eta, bint decay,
             Py_ssize_t avg_start, Py_ssize_t trace_stride):
    cdef Py_ssize_t T = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t t, j, k = 0
    cdef Py_ssize_t n_trace = T // trace_stride if trace_stride > 0 else 0
    cdef double r, phi, step, nrm, gnorm, max_g = 0.0, inv

    w_arr = np.zeros(d)
    acc_arr = np.zeros(d)
    c_arr = np.zeros(d)
    z_arr = np.zeros(d)
    xsum_arr = np.zeros(d)
    trace_arr = np.zeros((n_trace, d))
    cdef double[::1] w = w_arr, acc = acc_arr, c = c_arr, z = z_arr, xsum = xsum_arr
    cdef double[:, ::1] trace = trace_arr

    if not streaming:
        for j in range(d):
            c[j] = center[j]

    for t in range(1, T + 1):
        if streaming and t > 1:
            inv = 1.0 / (t - 1)
            for j in range(d):
                c[j] = xsum[j] * inv
        if t >= avg_start:
            for j in range(d):
                acc[j] += w[j]
        if trace_stride > 0 and t % trace_stride == 0:
            for j in range(d):
                trace[k, j] = w[j]
            k += 1

        r = 0.0
        for j in range(d):
            z[j] = X[t - 1, j] - c[j]
            r += w[j] * z[j]
        r -= y[t - 1]
        phi = r
        if phi > R:
            phi = R
        elif phi < -R:
            phi = -R

        step = eta / t if decay else eta
        gnorm = 0.0
        nrm = 0.0
        for j in range(d):
            gnorm += (phi * z[j]) * (phi * z[j])
            w[j] -= step * (phi * z[j])
            nrm += w[j] * w[j]
        if gnorm > max_g:
            max_g = gnorm
        nrm = sqrt(nrm)
        if nrm > D:
            for j in range(d):
                w[j] = (D / nrm) * w[j]

        if streaming:
            for j in range(d):
                xsum[j] += X[t - 1, j]

    inv = 1.0 / (T - avg_start + 1)
    for j in range(d):
        acc[j] *= inv
    return acc_arr, trace_arr, sqrt(max_g)
