"""The four shape objectives and their gradients w.r.t. the coefficient store.

=================  ==============================================================
mode               total loss
=================  ==============================================================
generate           -log C(I)[target]                       + lambda_reg * reg
saliency-keep      -log C(x * I)[true] + lambda_area * mean(I) + lambda_reg * reg
saliency-occlude   +log C(x * I)[true] - lambda_area * mean(I) + lambda_reg * reg
patch-attack       sum_j -log(1 - o_j), o = D(render(x, I, boxes)) + lambda_reg * reg
=================  ==============================================================

``I`` is the normalized winding mask of the contour.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compositing import as_image, composite_mask, render_patch
from .contour import ConfigurationError, FourierCoefficients
from .models import BoundingBox, NumericError
from .raster import CanvasSpec, normalize, rasterize_backward, rasterize_raw
from .regularizers import RegularizerConfig, area_term, reg_loss

MODES = ("generate", "saliency-keep", "saliency-occlude", "patch-attack")


@dataclass
class ObjectiveSpec:
    mode: str
    model: object
    label: int | None = None  # target class (generate) or true class (saliency)
    image: np.ndarray | None = None
    boxes: list = field(default_factory=list)
    patch_scale: float = 0.6
    patch_color: object = 1.0
    reg: RegularizerConfig = field(default_factory=RegularizerConfig)
    success_threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode != "patch-attack" and self.label is None:
            raise ConfigurationError(f"mode {self.mode} needs a class label")
        if self.mode != "generate":
            if self.image is None:
                raise ConfigurationError(f"mode {self.mode} needs a natural image")
            self.image = as_image(self.image)
        if self.mode == "patch-attack":
            if not self.boxes:
                raise ConfigurationError("patch-attack needs at least one bounding box")
            self.boxes = [BoundingBox.from_obj(b) for b in self.boxes]
            if not 0 < self.patch_scale <= 1:
                raise ConfigurationError(f"patch_scale must lie in (0, 1], got {self.patch_scale}")


@dataclass
class LossResult:
    value: float
    grad: np.ndarray
    data: float
    reg: float
    area: float
    scores: np.ndarray
    success: bool
    clamped: bool = False


def _classifier_input(model, mask_values):
    """Broadcast a single-channel mask to the classifier's channel count."""
    shape = getattr(model, "input_shape", None)
    C = shape[2] if shape else 1
    return np.repeat(mask_values[:, :, None], C, axis=2)


def evaluate(c: FourierCoefficients, spec: ObjectiveSpec, canvas: CanvasSpec,
             N: int | None = None, need_grad: bool = True) -> LossResult:
    """Total loss, its gradient, and per-term diagnostics for one coefficient set.

    ``need_grad=False`` skips the adjoint pass (``grad`` is then ``None``).
    """
    raw = rasterize_raw(c, canvas, N)
    mask = normalize(raw).values
    area, d_area = area_term(mask)
    reg_value, reg_grad = reg_loss(c, spec.reg)
    lam_area = spec.reg.lambda_area
    clamped = False

    if spec.mode == "generate":
        img = _classifier_input(spec.model, mask)
        r = spec.model.classify(img, spec.label)
        data = r.nll
        scores = r.probs
        up = r.grad.sum(axis=2)
        area_sign = 0.0
        success = int(np.argmax(scores)) == spec.label
    elif spec.mode in ("saliency-keep", "saliency-occlude"):
        img, pullback = composite_mask(spec.image, mask)
        r = spec.model.classify(img, spec.label)
        scores = r.probs
        if spec.mode == "saliency-keep":
            data, up, area_sign = r.nll, pullback(r.grad), 1.0
            success = int(np.argmax(scores)) == spec.label
        else:
            data, up, area_sign = -r.nll, -pullback(r.grad), -1.0
            success = int(np.argmax(scores)) != spec.label
    else:
        img, pullback = render_patch(spec.image, mask, spec.boxes, spec.patch_scale, spec.patch_color)
        r = spec.model.detect(img, spec.boxes)
        data, scores, clamped = r.loss, r.scores, r.clamped
        up = pullback(r.grad)
        area_sign = 0.0
        success = bool(np.all(scores < spec.success_threshold))

    total = data + area_sign * lam_area * area + spec.reg.lambda_reg * reg_value
    if not np.isfinite(total):
        raise NumericError(f"non-finite {spec.mode} loss")
    if not need_grad:
        return LossResult(float(total), None, float(data), reg_value, area,
                          np.asarray(scores), bool(success), clamped)
    if area_sign:
        up = up + area_sign * lam_area * d_area
    grad = rasterize_backward(c, canvas, N, up, raw=raw) + spec.reg.lambda_reg * reg_grad
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite {spec.mode} gradient")
    return LossResult(float(total), grad, float(data), reg_value, area,
                      np.asarray(scores), bool(success), clamped)


def _checked(spec, mode):
    if spec.mode != mode:
        raise ConfigurationError(f"objective mode is {spec.mode!r}, expected {mode!r}")


def loss_generate(c, spec, canvas=CanvasSpec(), N=None):
    _checked(spec, "generate")
    r = evaluate(c, spec, canvas, N)
    return r.value, r.grad


def loss_saliency_keep(c, x, spec, canvas=CanvasSpec(), N=None):
    _checked(spec, "saliency-keep")
    spec.image = as_image(x)
    r = evaluate(c, spec, canvas, N)
    return r.value, r.grad


def loss_saliency_occlude(c, x, spec, canvas=CanvasSpec(), N=None):
    _checked(spec, "saliency-occlude")
    spec.image = as_image(x)
    r = evaluate(c, spec, canvas, N)
    return r.value, r.grad


def loss_patch_attack(c, x, spec, canvas=CanvasSpec(), N=None):
    _checked(spec, "patch-attack")
    spec.image = as_image(x)
    r = evaluate(c, spec, canvas, N)
    return r.value, r.grad
