"""Brute-force reference computations for verification.

None of these call the winding kernels; the only shared code is contour
evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import FourierCoefficients, InvalidInputError, evaluate_contour, evaluate_derivative

KINKS = (-1.0, 0.0, 1.0)


@dataclass(frozen=True)
class FiniteDiffConfig:
    h: float = 1e-5
    scheme: str = "central"
    kink_exclusion_band: float = 5e-3

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInputError(f"h must be positive, got {self.h}")
        if self.scheme != "central":
            raise InvalidInputError(f"only central differences are supported, got {self.scheme!r}")


@dataclass
class FDResult:
    grad: np.ndarray
    flagged: np.ndarray  # parameters whose probe straddled a kink


def _crosses_kink(a, b, band):
    """True where ``a`` and ``b`` lie on opposite sides of a kink, within ``band`` of it."""
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    moved = (hi - lo) > 1e-12
    hit = np.zeros(a.shape, dtype=bool)
    for k in KINKS:
        hit |= (lo < k) & (hi > k) & (k - lo < band) & (hi - k < band)
    return bool(np.any(hit & moved))


def fd_gradient(loss_fn, params, cfg: FiniteDiffConfig = FiniteDiffConfig(), kink_probe=None) -> FDResult:
    """Central-difference gradient of ``loss_fn`` at ``params``.

    ``kink_probe(params)`` may return the raw winding field; a parameter is
    flagged when its ``+-h`` probes put some pixel on both sides of ``0`` or
    ``+-1`` (where ``clip(|W|, 0, 1)`` is not differentiable).
    """
    p0 = np.array(params, dtype=np.float64)
    grad = np.zeros_like(p0)
    flagged = np.zeros(p0.size, dtype=bool)
    for i in range(p0.size):
        plus = p0.copy()
        minus = p0.copy()
        plus[i] += cfg.h
        minus[i] -= cfg.h
        fp, fm = loss_fn(plus), loss_fn(minus)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite loss while probing parameter {i}")
        grad[i] = (fp - fm) / (2.0 * cfg.h)
        if kink_probe is not None:
            flagged[i] = _crosses_kink(np.asarray(kink_probe(plus)), np.asarray(kink_probe(minus)),
                                       cfg.kink_exclusion_band)
    return FDResult(grad, flagged)


def gradient_agreement(analytic, fd: FDResult, rtol=1e-3, atol=1e-6):
    """Boolean mask of parameters where ``|analytic - fd| <= atol + rtol*|fd|``."""
    analytic = np.asarray(analytic)
    return np.abs(analytic - fd.grad) <= atol + rtol * np.abs(fd.grad)


# -- polygons ---------------------------------------------------------------

INSIDE, OUTSIDE, BOUNDARY = "inside", "outside", "boundary"


def _check_polygon(polygon):
    poly = np.asarray(polygon, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise InvalidInputError("polygon needs at least 3 (x, y) vertices")
    if np.allclose(poly[0], poly[-1]) and poly.shape[0] > 3:
        poly = poly[:-1]
    edges = np.roll(poly, -1, axis=0) - poly
    if np.all(np.hypot(edges[:, 0], edges[:, 1]) == 0):
        raise InvalidInputError("degenerate polygon")
    return poly


def distance_to_polygon(points, polygon, candidates: int = 16) -> np.ndarray:
    """Euclidean distance from each point to the closed polyline.

    Exact segment distances are taken over the edges adjacent to the
    ``candidates`` nearest vertices (KD-tree), which contains the closest edge
    whenever vertex spacing is small next to the distances of interest.
    """
    from scipy.spatial import cKDTree

    poly = _check_polygon(polygon)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(poly)
    k = min(candidates, n)
    _, nearest = cKDTree(poly).query(pts, k=k)
    nearest = nearest.reshape(len(pts), k)
    edges = np.concatenate([nearest, (nearest - 1) % n], axis=1)
    a = poly[edges]
    d = poly[(edges + 1) % n] - a
    dd = np.maximum((d * d).sum(axis=2), 1e-300)
    p = pts[:, None, :]
    t = np.clip(((p - a) * d).sum(axis=2) / dd, 0.0, 1.0)
    q = a + t[:, :, None] * d
    return np.sqrt(((p - q) ** 2).sum(axis=2)).min(axis=1)


def points_in_polygon(points, polygon, tol: float = 1e-9) -> np.ndarray:
    """Even-odd ray casting for many points; returns an array of inside/outside/boundary labels."""
    poly = _check_polygon(polygon)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    labels = np.empty(len(pts), dtype=object)
    near = distance_to_polygon(pts, poly) <= tol
    for s in range(0, len(pts), 64):
        px = pts[s:s + 64, 0:1]
        py = pts[s:s + 64, 1:2]
        straddle = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        crossings = (straddle & (px < x_cross)).sum(axis=1)
        labels[s:s + 64] = np.where(crossings % 2 == 1, INSIDE, OUTSIDE)
    labels[near] = BOUNDARY
    return labels


def point_in_polygon(point, polygon, tol: float = 1e-9) -> str:
    return points_in_polygon([point], polygon, tol)[0]


def is_simple_polygon(polygon) -> bool:
    """No two non-adjacent edges intersect (proper or touching)."""
    poly = _check_polygon(polygon)
    n = len(poly)
    a = poly
    b = np.roll(poly, -1, axis=0)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    for s in range(0, i.size, 1 << 18):
        ii, jj = i[s:s + (1 << 18)], j[s:s + (1 << 18)]
        p1, p2, q1, q2 = a[ii], b[ii], a[jj], b[jj]
        d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
        d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
        if np.any((d1 * d2 <= 0) & (d3 * d4 <= 0)):
            return False
    return True


# -- quadrature -------------------------------------------------------------

def quadrature_winding(c: FourierCoefficients, point, N_hi: int = 65536):
    """Winding number by high-resolution trapezoid quadrature of the angle integrand.

    ``point`` may be one ``(x, y)`` pair (returns a float) or an ``(M, 2)``
    array (returns ``M`` values; the contour is sampled once).
    """
    if N_hi < 4096:
        raise InvalidInputError(f"N_hi must be >= 4096, got {N_hi}")
    t = np.arange(N_hi) * (2.0 * np.pi / N_hi)
    xy = evaluate_contour(c, t)
    dxy = evaluate_derivative(c, t)
    pts = np.asarray(point, dtype=np.float64)
    out = np.empty(pts.reshape(-1, 2).shape[0])
    for i, (px, py) in enumerate(pts.reshape(-1, 2)):
        x = xy[:, 0] - px
        y = xy[:, 1] - py
        out[i] = ((x * dxy[:, 1] - y * dxy[:, 0]) / (x * x + y * y)).sum() / N_hi
    return float(out[0]) if pts.ndim == 1 else out
