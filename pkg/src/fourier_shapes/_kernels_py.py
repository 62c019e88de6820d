"""Pure numpy winding kernels (fallback when the compiled extension is absent).

Both kernels take evaluation points ``(px, py)`` and contour samples
``f, g`` (positions) and ``fp, gp`` (tangents), all float64 1-D arrays.
Points are processed in fixed-size chunks in input order so results do not
depend on memory pressure.
"""

import numpy as np

CHUNK = 2048


def winding_forward(px, py, f, g, fp, gp, eps):
    n = f.shape[0]
    out = np.empty(px.shape[0], dtype=np.float64)
    for s in range(0, px.shape[0], CHUNK):
        dx = f[None, :] - px[s:s + CHUNK, None]
        dy = g[None, :] - py[s:s + CHUNK, None]
        num = dx * gp[None, :] - dy * fp[None, :]
        den = dx * dx + dy * dy + eps
        out[s:s + CHUNK] = (num / den).sum(axis=1) / n
    return out


def winding_backward(px, py, f, g, fp, gp, eps, gw):
    """Adjoint of :func:`winding_forward` given ``gw = dL/dW`` per point.

    Returns ``(df, dg, dfp, dgp)``, each of length N.
    """
    n = f.shape[0]
    df = np.zeros(n)
    dg = np.zeros(n)
    dfp = np.zeros(n)
    dgp = np.zeros(n)
    nz = np.flatnonzero(gw)
    for s in range(0, nz.size, CHUNK):
        idx = nz[s:s + CHUNK]
        w = (gw[idx] / n)[:, None]
        dx = f[None, :] - px[idx, None]
        dy = g[None, :] - py[idx, None]
        num = dx * gp[None, :] - dy * fp[None, :]
        inv = 1.0 / (dx * dx + dy * dy + eps)
        q = 2.0 * num * inv * inv
        df += (w * (gp[None, :] * inv - q * dx)).sum(axis=0)
        dg += (w * (-fp[None, :] * inv - q * dy)).sum(axis=0)
        dfp += (w * (-dy * inv)).sum(axis=0)
        dgp += (w * (dx * inv)).sum(axis=0)
    return df, dg, dfp, dgp
