"""Pure-Python projected-SGD loop.

Same signature, arithmetic order and outputs as the compiled ``_sgd_ext``;
used when the extension is not built or ``ROBUSTREG_BACKEND=python``.
"""
import math

import numpy as np


def sgd_path(X, y, center, streaming, R, D, eta, decay, avg_start, trace_stride):
    """Run projected SGD over the rows of ``X``.

    Step ``t`` (1-based) uses ``phi = clip(<w_t, x_t - c_t> - y_t, R)`` and
    ``g_t = phi * (x_t - c_t)``, where ``c_t`` is ``center`` or, when
    ``streaming``, the mean of ``x_1 .. x_{t-1}`` (zero at ``t = 1``).  The
    step is ``eta / t`` if ``decay`` else ``eta``.  ``R = inf`` disables
    clipping.  Returns the average of ``w_avg_start .. w_T``, the iterates
    ``w_t`` at multiples of ``trace_stride`` and the largest ``||g_t||``.
    """
    T, d = len(X), len(X[0])
    rows = X.tolist()
    ys = y.tolist()
    w = [0.0] * d
    acc = [0.0] * d
    c = [0.0] * d if streaming else [float(v) for v in center]
    xsum = [0.0] * d
    trace = []
    max_g = 0.0

    for t in range(1, T + 1):
        if streaming and t > 1:
            inv = 1.0 / (t - 1)
            c = [s * inv for s in xsum]
        if t >= avg_start:
            acc = [a + wj for a, wj in zip(acc, w)]
        if trace_stride > 0 and t % trace_stride == 0:
            trace.append(list(w))

        x = rows[t - 1]
        z = [xj - cj for xj, cj in zip(x, c)]
        r = 0.0
        for wj, zj in zip(w, z):
            r += wj * zj
        r -= ys[t - 1]
        phi = r
        if phi > R:
            phi = R
        elif phi < -R:
            phi = -R

        step = eta / t if decay else eta
        gnorm = 0.0
        nrm = 0.0
        for j in range(d):
            g = phi * z[j]
            gnorm += g * g
            w[j] -= step * g
            nrm += w[j] * w[j]
        if gnorm > max_g:
            max_g = gnorm
        nrm = math.sqrt(nrm)
        if nrm > D:
            w = [(D / nrm) * wj for wj in w]

        if streaming:
            xsum = [s + xj for s, xj in zip(xsum, x)]

    inv = 1.0 / (T - avg_start + 1)
    estimate = np.array([a * inv for a in acc])
    trace_arr = np.array(trace, dtype=np.float64).reshape(len(trace), d)
    return estimate, trace_arr, math.sqrt(max_g)
