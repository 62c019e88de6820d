"""Differentiable winding-number rasterization.

Each pixel centre ``(x0, y0)`` receives the discrete winding sum

    W = (1/N) sum_j [(f_j - x0) g'_j - (g_j - y0) f'_j] / [(f_j - x0)^2 + (g_j - y0)^2 + eps]

over ``N`` uniform contour samples.  Note there is no ``2*pi`` factor: with
``dt = 2*pi/N`` the ``1/(2*pi)`` of the line integral cancels exactly.  The
mask fed downstream is ``clip(|W|, 0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .contour import (
    ConfigurationError,
    FourierCoefficients,
    InvalidInputError,
    default_samples,
    evaluate_contour,
    sample_contour,
    samples_pullback,
)

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class CanvasSpec:
    width: int = 224
    height: int = 224
    x_range: tuple = (-1.0, 1.0)
    y_range: tuple = (-1.0, 1.0)
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        if int(self.width) < 1 or int(self.height) < 1:
            raise ConfigurationError(f"canvas must be at least 1x1, got {self.width}x{self.height}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
                raise ConfigurationError(f"{name} must be a finite increasing interval, got {(lo, hi)}")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def pixel_size(self):
        """Cell pitch ``(dx, dy)`` in canvas units."""
        return (
            (self.x_range[1] - self.x_range[0]) / self.width,
            (self.y_range[1] - self.y_range[0]) / self.height,
        )

    def pixel_centres(self):
        """``(xs, ys)``: centre coordinates of columns and rows."""
        dx, dy = self.pixel_size
        xs = self.x_range[0] + (np.arange(self.width) + 0.5) * dx
        ys = self.y_range[0] + (np.arange(self.height) + 0.5) * dy
        return xs, ys

    def point_grid(self):
        """Row-major flattened pixel-centre coordinates."""
        xs, ys = self.pixel_centres()
        px = np.tile(xs, self.height)
        py = np.repeat(ys, self.width)
        return px, py

    def to_dict(self):
        return {
            "width": self.width,
            "height": self.height,
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RasterGrid:
    canvas: CanvasSpec
    values: np.ndarray = field(repr=False)
    normalized: bool = False

    def mean(self) -> float:
        return float(self.values.mean())


def _samples(c: FourierCoefficients, N: int | None):
    N = default_samples(c.K) if N is None else int(N)
    s = sample_contour(c, N)
    return (
        s,
        np.ascontiguousarray(s.points[:, 0]),
        np.ascontiguousarray(s.points[:, 1]),
        np.ascontiguousarray(s.tangents[:, 0]),
        np.ascontiguousarray(s.tangents[:, 1]),
    )


def winding_points(c: FourierCoefficients, px, py, N: int | None = None,
                   eps: float = DEFAULT_EPS, backend: str | None = None) -> np.ndarray:
    """Discrete winding sum at many points at once."""
    _, f, g, fp, gp = _samples(c, N)
    px = np.ascontiguousarray(px, dtype=np.float64).reshape(-1)
    py = np.ascontiguousarray(py, dtype=np.float64).reshape(-1)
    return _backend.get(backend).winding_forward(px, py, f, g, fp, gp, float(eps))


def winding_number(c: FourierCoefficients, point, N: int | None = None,
                   eps: float = DEFAULT_EPS) -> float:
    x0, y0 = point
    if not (np.isfinite(x0) and np.isfinite(y0)):
        raise InvalidInputError("point must be finite")
    return float(winding_points(c, [x0], [y0], N, eps)[0])


def rasterize_raw(c: FourierCoefficients, canvas: CanvasSpec = CanvasSpec(),
                  N: int | None = None, backend: str | None = None) -> RasterGrid:
    px, py = canvas.point_grid()
    w = winding_points(c, px, py, N, canvas.epsilon, backend)
    return RasterGrid(canvas, w.reshape(canvas.shape))


def normalize(raw: RasterGrid) -> RasterGrid:
    v = np.asarray(raw.values)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("raw grid contains non-finite values")
    return RasterGrid(raw.canvas, np.clip(np.abs(v), 0.0, 1.0), normalized=True)


def normalize_pullback(raw_values: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Subgradient of ``clip(|W|, 0, 1)``: ``sign(W)`` where ``|W| < 1``, else 0."""
    a = np.abs(raw_values)
    return np.where(a < 1.0, np.sign(raw_values), 0.0) * upstream


def rasterize(c: FourierCoefficients, canvas: CanvasSpec = CanvasSpec(),
              N: int | None = None, backend: str | None = None) -> RasterGrid:
    """Normalized mask in ``[0, 1]``."""
    return normalize(rasterize_raw(c, canvas, N, backend))


def rasterize_backward(c: FourierCoefficients, canvas: CanvasSpec, N: int | None,
                       upstream, raw: RasterGrid | None = None,
                       backend: str | None = None) -> np.ndarray:
    """Gradient of ``sum(upstream * normalized_mask)`` w.r.t. the flat coefficient store.

    ``raw`` may be passed to skip recomputing the forward pass; it must come
    from the same ``c``, ``canvas`` and ``N``.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != canvas.shape:
        raise InvalidInputError(f"upstream shape {upstream.shape} does not match canvas {canvas.shape}")
    if raw is None:
        raw = rasterize_raw(c, canvas, N, backend)
    gw = np.ascontiguousarray(normalize_pullback(raw.values, upstream).reshape(-1))
    s, f, g, fp, gp = _samples(c, N)
    if not gw.any():
        return np.zeros(c.n_params)
    px, py = canvas.point_grid()
    df, dg, dfp, dgp = _backend.get(backend).winding_backward(
        px, py, f, g, fp, gp, float(canvas.epsilon), gw
    )
    return samples_pullback(c, s.t, np.column_stack([df, dg]), np.column_stack([dfp, dgp]))


def polygonize(c: FourierCoefficients, M: int) -> np.ndarray:
    """``(M, 2)`` vertices at uniform ``t``; the closing edge is implicit."""
    if M < 3:
        raise ConfigurationError(f"polygon needs at least 3 vertices, got {M}")
    t = np.arange(M) * (2.0 * np.pi / M)
    return evaluate_contour(c, t)


def perimeter(vertices: np.ndarray) -> float:
    d = np.diff(np.vstack([vertices, vertices[:1]]), axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())
