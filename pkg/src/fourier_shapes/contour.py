"""Closed contours as truncated complex Fourier series.

A contour is ``F(t) = sum_{k=-K}^{K} c_k exp(i k t)`` for ``t`` in ``[0, 2*pi)``,
with ``x = Re F`` and ``y = Im F``.  Coefficients are stored as one flat real
vector ``[a_{-K}, b_{-K}, ..., a_K, b_K]`` where ``c_k = a_k + i b_k``; every
gradient and optimizer state in the package uses this layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class InvalidInputError(ValueError):
    """Raised for malformed or non-finite inputs."""


class ConfigurationError(ValueError):
    """Raised when a configuration value is outside its allowed range."""


def sampling_floor(K: int) -> int:
    return 4 * K


def default_samples(K: int) -> int:
    return max(256, 8 * K)


@dataclass(frozen=True, eq=False)
class FourierCoefficients:
    """Spectrum ``{c_k}``, ``k = -K..K``, backed by a flat real vector."""

    K: int
    params: np.ndarray

    def __post_init__(self):
        if not isinstance(self.K, (int, np.integer)) or self.K < 0:
            raise InvalidInputError(f"K must be a non-negative integer, got {self.K!r}")
        p = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if p.size != 2 * (2 * self.K + 1):
            raise InvalidInputError(
                f"expected {2 * (2 * self.K + 1)} real parameters for K={self.K}, got {p.size}"
            )
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("coefficients contain non-finite values")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "params", p)

    @classmethod
    def zeros(cls, K: int) -> "FourierCoefficients":
        return cls(K, np.zeros(2 * (2 * K + 1)))

    @classmethod
    def from_complex(cls, c) -> "FourierCoefficients":
        c = np.asarray(c, dtype=np.complex128).reshape(-1)
        if c.size % 2 != 1:
            raise InvalidInputError("complex spectrum must have odd length 2K+1")
        K = (c.size - 1) // 2
        return cls(K, np.column_stack([c.real, c.imag]).reshape(-1))

    @classmethod
    def from_dict(cls, terms: dict, K: int | None = None) -> "FourierCoefficients":
        """Build from a sparse ``{k: c_k}`` mapping; unspecified terms are zero."""
        if K is None:
            K = max((abs(int(k)) for k in terms), default=0)
        c = np.zeros(2 * K + 1, dtype=np.complex128)
        for k, v in terms.items():
            if abs(k) > K:
                raise InvalidInputError(f"harmonic {k} exceeds K={K}")
            c[k + K] = v
        return cls.from_complex(c)

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def complex(self) -> np.ndarray:
        ab = self.params.reshape(-1, 2)
        return ab[:, 0] + 1j * ab[:, 1]

    def __getitem__(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0j
        a, b = self.params[2 * (k + self.K): 2 * (k + self.K) + 2]
        return complex(a, b)

    def with_params(self, params: np.ndarray) -> "FourierCoefficients":
        return FourierCoefficients(self.K, params)

    def translated(self, delta: complex) -> "FourierCoefficients":
        c = self.complex()
        c[self.K] += delta
        return FourierCoefficients.from_complex(c)

    def reversed(self) -> "FourierCoefficients":
        """Same point set traversed clockwise instead: ``c_k -> c_{-k}``."""
        return FourierCoefficients.from_complex(self.complex()[::-1])

    def resized(self, K: int) -> "FourierCoefficients":
        """Zero-pad or truncate to a new harmonic order."""
        out = np.zeros(2 * K + 1, dtype=np.complex128)
        m = min(K, self.K)
        out[K - m: K + m + 1] = self.complex()[self.K - m: self.K + m + 1]
        return FourierCoefficients.from_complex(out)

    def __eq__(self, other):
        if not isinstance(other, FourierCoefficients):
            return NotImplemented
        return self.K == other.K and np.array_equal(self.params, other.params)

    def __repr__(self):
        return f"FourierCoefficients(K={self.K}, params={self.params.tolist()!r})"


@dataclass(frozen=True, eq=False)
class ContourSamples:
    N: int
    t: np.ndarray
    points: np.ndarray  # (N, 2)
    tangents: np.ndarray  # (N, 2)


def _basis(K: int, t: np.ndarray) -> np.ndarray:
    """``exp(i k t)`` for every ``t`` (rows) and ``k`` (columns)."""
    return np.exp(1j * np.multiply.outer(t, np.arange(-K, K + 1)))


def evaluate_contour(c: FourierCoefficients, t):
    """Point ``(x, y)`` on the contour at parameter ``t``.

    Scalar ``t`` returns a 2-tuple of floats; an array returns an ``(..., 2)`` array.
    """
    tt = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(tt)):
        raise InvalidInputError("t must be finite")
    z = _basis(c.K, tt) @ c.complex()
    if tt.ndim == 0:
        return float(z.real), float(z.imag)
    return np.stack([z.real, z.imag], axis=-1)


def evaluate_derivative(c: FourierCoefficients, t):
    """Tangent ``(dx/dt, dy/dt)``; same shape conventions as :func:`evaluate_contour`."""
    tt = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(tt)):
        raise InvalidInputError("t must be finite")
    z = _basis(c.K, tt) @ (1j * c.orders * c.complex())
    if tt.ndim == 0:
        return float(z.real), float(z.imag)
    return np.stack([z.real, z.imag], axis=-1)


def sample_times(N: int) -> np.ndarray:
    return np.arange(N) * (TWO_PI / N)


def sample_contour(c: FourierCoefficients, N: int) -> ContourSamples:
    if N < max(1, sampling_floor(c.K)):
        raise ConfigurationError(
            f"N={N} is below the sampling floor 4*K={sampling_floor(c.K)} (minimum 1)"
        )
    t = sample_times(N)
    E = _basis(c.K, t)
    cc = c.complex()
    z = E @ cc
    dz = E @ (1j * c.orders * cc)
    return ContourSamples(
        N=N,
        t=t,
        points=np.column_stack([z.real, z.imag]),
        tangents=np.column_stack([dz.real, dz.imag]),
    )


def amplitude_spectrum(c: FourierCoefficients) -> np.ndarray:
    ab = c.params.reshape(-1, 2)
    return np.hypot(ab[:, 0], ab[:, 1])


def samples_pullback(c: FourierCoefficients, t, d_points, d_tangents) -> np.ndarray:
    """Chain per-sample adjoints of ``(f, g)`` and ``(f', g')`` back to the flat store.

    ``d_points[j] = (dL/df_j, dL/dg_j)`` and ``d_tangents[j] = (dL/df'_j, dL/dg'_j)``.
    """
    k = c.orders.astype(np.float64)
    kt = np.multiply.outer(np.asarray(t, dtype=np.float64), k)
    cos, sin = np.cos(kt), np.sin(kt)
    df, dg = d_points[:, 0], d_points[:, 1]
    dfp, dgp = d_tangents[:, 0], d_tangents[:, 1]
    # f = a cos - b sin, g = a sin + b cos, f' = -k(a sin + b cos), g' = k(a cos - b sin)
    ga = df @ cos + dg @ sin + k * (dgp @ cos - dfp @ sin)
    gb = -(df @ sin) + dg @ cos - k * (dfp @ cos + dgp @ sin)
    return np.column_stack([ga, gb]).reshape(-1)
