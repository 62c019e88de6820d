"""Mask compositing and bbox-relative patch rendering, with adjoints w.r.t. the mask."""

from __future__ import annotations

import numpy as np

from .contour import InvalidInputError
from .models import BoundingBox


def as_image(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[2] not in (1, 3):
        raise InvalidInputError(f"images are (H, W, 1|3), got {x.shape}")
    if not (np.all(np.isfinite(x)) and x.min(initial=0.0) >= 0.0 and x.max(initial=0.0) <= 1.0):
        raise InvalidInputError("image values must lie in [0, 1]")
    return x


def _mask_values(mask):
    return np.asarray(getattr(mask, "values", mask), dtype=np.float64)


def composite_mask(x, mask):
    """``x * mask`` (mask broadcast over channels) and the adjoint w.r.t. the mask."""
    x = as_image(x)
    m = _mask_values(mask)
    if m.shape != x.shape[:2]:
        raise InvalidInputError(f"mask {m.shape} does not match image {x.shape[:2]}")
    out = x * m[:, :, None]

    def pullback(d_out):
        return (np.asarray(d_out) * x).sum(axis=2)

    return out, pullback


def _bilinear_taps(u, v, Hm, Wm):
    """Indices and weights of the 4 bilinear taps for fractional mask coords (edge-clamped)."""
    u = np.clip(u, 0.0, Wm - 1.0)
    v = np.clip(v, 0.0, Hm - 1.0)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    u1 = np.minimum(u0 + 1, Wm - 1)
    v1 = np.minimum(v0 + 1, Hm - 1)
    fu = u - u0
    fv = v - v0
    idx = np.stack([v0 * Wm + u0, v0 * Wm + u1, v1 * Wm + u0, v1 * Wm + u1], axis=-1)
    w = np.stack([(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv], axis=-1)
    return idx, w


def render_patch(x, mask, boxes, patch_scale: float = 0.6, patch_color=1.0):
    """Alpha-composite the mask as a solid patch onto every box.

    The mask canvas is stretched over a ``patch_scale*w`` by ``patch_scale*h``
    rectangle centred on each box (mask row 0 at the rectangle's top) and
    resampled bilinearly into alpha.  Boxes are applied in order.  Returns the
    rendered image and the adjoint w.r.t. the mask.
    """
    x = as_image(x)
    m = _mask_values(mask)
    if not 0 < patch_scale <= 1:
        raise InvalidInputError(f"patch_scale must lie in (0, 1], got {patch_scale}")
    boxes = [BoundingBox.from_obj(b) for b in boxes]
    if not boxes:
        raise InvalidInputError("render_patch needs at least one box")
    color = np.broadcast_to(np.asarray(patch_color, dtype=np.float64), (x.shape[2],))
    Hm, Wm = m.shape
    flat_mask = m.reshape(-1)

    out = x.copy()
    tape = []
    for box in boxes:
        box.pixel_slices(x.shape)  # the box itself must intersect the image
        rs, cs = box.pixel_slices(x.shape, patch_scale)
        rw, rh = patch_scale * box.w, patch_scale * box.h
        left, top = box.cx - 0.5 * rw, box.cy - 0.5 * rh
        cols = np.arange(cs.start, cs.stop) + 0.5
        rows = np.arange(rs.start, rs.stop) + 0.5
        u = (cols - left) / rw * Wm - 0.5
        v = (rows - top) / rh * Hm - 0.5
        idx, w = _bilinear_taps(u[None, :], v[:, None], Hm, Wm)
        alpha = (flat_mask[idx] * w).sum(axis=-1)[:, :, None]
        under = out[rs, cs].copy()
        out[rs, cs] = under * (1.0 - alpha) + color * alpha
        tape.append((rs, cs, idx, w, alpha, under))

    def pullback(d_out):
        d = np.array(d_out, dtype=np.float64, copy=True)
        d_mask = np.zeros(Hm * Wm)
        for rs, cs, idx, w, alpha, under in reversed(tape):
            d_region = d[rs, cs]
            d_alpha = (d_region * (color - under)).sum(axis=2)
            np.add.at(d_mask, idx.reshape(-1), (d_alpha[:, :, None] * w).reshape(-1))
            d[rs, cs] = d_region * (1.0 - alpha)
        return d_mask.reshape(Hm, Wm)

    return out, pullback
