"""Spectral plausibility penalty and mask-area term."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .contour import ConfigurationError, FourierCoefficients, amplitude_spectrum


@dataclass(frozen=True)
class RegularizerConfig:
    lam: float = 2.0  # fundamental dominance factor, > 1
    gamma: float = 0.25  # per-harmonic cap as a fraction of the fundamental sum
    lambda_reg: float = 0.1
    lambda_area: float = 1.0

    def __post_init__(self):
        if not self.lam > 1:
            raise ConfigurationError(f"lambda must be > 1, got {self.lam}")
        if not 0 < self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("lambda_reg", "lambda_area"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be finite and non-negative, got {v}")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


def fundamental_and_harmonic_sums(c: FourierCoefficients):
    amp = amplitude_spectrum(c)
    k = np.abs(c.orders)
    return float(amp[k == 1].sum()), float(amp[k >= 2].sum())


def reg_loss(c: FourierCoefficients, cfg: RegularizerConfig = RegularizerConfig()):
    """Penalty ``relu(lam*S_harm - S_fund) + sum_{|k|>=2} relu(|c_k| - gamma*S_fund)``.

    Returns ``(value, grad)`` with ``grad`` in the flat coefficient layout.
    Subgradient conventions: ``d|c|/dc = 0`` at ``c = 0`` and ``relu'(0) = 0``.
    """
    ab = c.params.reshape(-1, 2)
    amp = np.hypot(ab[:, 0], ab[:, 1])
    k = np.abs(c.orders)
    fund = k == 1
    harm = k >= 2
    s_fund = amp[fund].sum()
    s_harm = amp[harm].sum()

    dominance = cfg.lam * s_harm - s_fund
    excess = amp[harm] - cfg.gamma * s_fund
    value = max(dominance, 0.0) + np.maximum(excess, 0.0).sum()

    # dL/d|c_k|
    d_amp = np.zeros_like(amp)
    dom_on = 1.0 if dominance > 0 else 0.0
    cap_on = (excess > 0).astype(np.float64)
    d_amp[harm] = cfg.lam * dom_on + cap_on
    d_amp[fund] = -dom_on - cfg.gamma * cap_on.sum()

    unit = np.divide(ab, amp[:, None], out=np.zeros_like(ab), where=amp[:, None] > 0)
    grad = (d_amp[:, None] * unit).reshape(-1)
    return float(value), grad


def area_term(mask) -> tuple[float, np.ndarray]:
    """``mean(mask)`` and its adjoint field (``1/(H*W)`` everywhere)."""
    v = np.asarray(getattr(mask, "values", mask), dtype=np.float64)
    return float(v.mean()), np.full(v.shape, 1.0 / v.size)
