# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled winding kernels. Same contract as ``_kernels_py``.

Reduction order is fixed: points in input order, samples ascending.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def winding_forward(const double[::1] px, const double[::1] py,
                    const double[::1] f, const double[::1] g,
                    const double[::1] fp, const double[::1] gp, double eps):
    cdef Py_ssize_t m = px.shape[0], n = f.shape[0], p, j
    cdef double x0, y0, dx, dy, acc
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for p in range(m):
            x0 = px[p]
            y0 = py[p]
            acc = 0.0
            for j in range(n):
                dx = f[j] - x0
                dy = g[j] - y0
                acc = acc + (dx * gp[j] - dy * fp[j]) / (dx * dx + dy * dy + eps)
            o[p] = acc / n
    return out


def winding_backward(const double[::1] px, const double[::1] py,
                     const double[::1] f, const double[::1] g,
                     const double[::1] fp, const double[::1] gp, double eps,
                     const double[::1] gw):
    cdef Py_ssize_t m = px.shape[0], n = f.shape[0], p, j, k, nnz = 0
    cdef double dx, dy, num, inv, q, w, fj, gj, fpj, gpj, sf, sg, sfp, sgp
    # compact points with a non-zero adjoint into contiguous arrays, order kept
    cx_a = np.empty(m)
    cy_a = np.empty(m)
    cw_a = np.empty(m)
    cdef double[::1] cx = cx_a, cy = cy_a, cw = cw_a
    for p in range(m):
        if gw[p] != 0.0:
            cx[nnz] = px[p]
            cy[nnz] = py[p]
            cw[nnz] = gw[p] / n
            nnz += 1
    df_a = np.zeros(n)
    dg_a = np.zeros(n)
    dfp_a = np.zeros(n)
    dgp_a = np.zeros(n)
    cdef double[::1] df = df_a, dg = dg_a, dfp = dfp_a, dgp = dgp_a
    with nogil:
        for j in range(n):
            fj = f[j]
            gj = g[j]
            fpj = fp[j]
            gpj = gp[j]
            sf = 0.0
            sg = 0.0
            sfp = 0.0
            sgp = 0.0
            for k in range(nnz):
                w = cw[k]
                dx = fj - cx[k]
                dy = gj - cy[k]
                num = dx * gpj - dy * fpj
                inv = 1.0 / (dx * dx + dy * dy + eps)
                q = 2.0 * num * inv * inv
                sf = sf + w * (gpj * inv - q * dx)
                sg = sg + w * (-fpj * inv - q * dy)
                sfp = sfp + w * (-dy * inv)
                sgp = sgp + w * (dx * inv)
            df[j] = sf
            dg[j] = sg
            dfp[j] = sfp
            dgp[j] = sgp
    return df_a, dg_a, dfp_a, dgp_a
