"""Fixed-weight differentiable stand-ins for a classifier and a detector.

Images are ``(H, W, C)`` float arrays; classifiers flatten them row-major.
Every model exposes exact pixel gradients.  Weights are loaded, never trained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contour import InvalidInputError
from .io import FormatError, read_raw, write_raw


class ModelError(RuntimeError):
    """Model failure (bad weights, non-finite outputs)."""


class NumericError(ModelError):
    """A loss or gradient became non-finite."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates; pixel ``(col, row)`` spans ``[col, col+1)``."""

    cx: float
    cy: float
    w: float
    h: float
    label: str = ""

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidInputError(f"box {self} must have positive width and height")

    def pixel_slices(self, shape, scale: float = 1.0):
        """Row/column slices of pixels whose centres fall in the scaled box, clamped to ``shape``."""
        H, W = shape[:2]
        x0 = self.cx - 0.5 * scale * self.w
        x1 = self.cx + 0.5 * scale * self.w
        y0 = self.cy - 0.5 * scale * self.h
        y1 = self.cy + 0.5 * scale * self.h
        c0 = max(int(np.ceil(x0 - 0.5)), 0)
        c1 = min(int(np.ceil(x1 - 0.5)), W)
        r0 = max(int(np.ceil(y0 - 0.5)), 0)
        r1 = min(int(np.ceil(y1 - 0.5)), H)
        if c1 <= c0 or r1 <= r0:
            raise InvalidInputError(f"box {self.label or ''}{(self.cx, self.cy, self.w, self.h)} "
                                    f"lies outside the {H}x{W} image")
        return slice(r0, r1), slice(c0, c1)

    def to_list(self):
        return [self.cx, self.cy, self.w, self.h]

    @classmethod
    def from_obj(cls, obj):
        if isinstance(obj, BoundingBox):
            return obj
        if isinstance(obj, dict):
            return cls(float(obj["cx"]), float(obj["cy"]), float(obj["w"]), float(obj["h"]),
                       str(obj.get("label", "")))
        cx, cy, w, h = obj[:4]
        return cls(float(cx), float(cy), float(w), float(h))


@dataclass
class ClassifyResult:
    probs: np.ndarray
    nll: float  # -log p[target]
    grad: np.ndarray  # d nll / d image


@dataclass
class DetectResult:
    scores: np.ndarray
    loss: float  # sum_j -log(1 - o_j)
    grad: np.ndarray  # d loss / d image
    clamped: bool = False


SCORE_CEILING = 1.0 - 1e-7


def _log_softmax(z):
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    return z - lse


def detection_loss(scores):
    """``sum -log(1 - o)`` with ``o`` clamped below 1; returns ``(loss, dloss/do, clamped)``."""
    o = np.asarray(scores, dtype=np.float64)
    clamped = bool(np.any(o > SCORE_CEILING))
    oc = np.minimum(o, SCORE_CEILING)
    return float(-np.log1p(-oc).sum()), np.where(o > SCORE_CEILING, 0.0, 1.0 / (1.0 - oc)), clamped


class _Classifier:
    kind = ""
    task = "classify"

    def __init__(self, input_shape):
        self.input_shape = tuple(int(v) for v in input_shape)

    def _check(self, image):
        image = np.asarray(image, dtype=np.float64)
        if image.shape != self.input_shape:
            raise InvalidInputError(f"{self.kind} expects input {self.input_shape}, got {image.shape}")
        return image

    def logits(self, image):
        raise NotImplementedError

    def logits_pullback(self, image, dz):
        raise NotImplementedError

    def forward(self, image):
        """Class probabilities and a closure mapping ``dL/dprobs`` to ``dL/dimage``."""
        image = self._check(image)
        z = self.logits(image)
        p = np.exp(_log_softmax(z))

        def pullback(dp):
            dp = np.asarray(dp, dtype=np.float64)
            dz = p * (dp - np.dot(dp, p))
            return self.logits_pullback(image, dz)

        return p, pullback

    def classify(self, image, target: int) -> ClassifyResult:
        image = self._check(image)
        z = self.logits(image)
        if not 0 <= target < z.size:
            raise InvalidInputError(f"class {target} out of range for {z.size} classes")
        logp = _log_softmax(z)
        p = np.exp(logp)
        dz = p.copy()
        dz[target] -= 1.0
        nll = float(-logp[target])
        if not np.isfinite(nll):
            raise NumericError(f"non-finite classifier loss for class {target}")
        return ClassifyResult(p, nll, self.logits_pullback(image, dz))


class LinearClassifier(_Classifier):
    """``softmax(W @ flatten(image) + b)``."""

    kind = "builtin-linear"

    def __init__(self, weight, bias, input_shape):
        super().__init__(input_shape)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        D = int(np.prod(self.input_shape))
        if self.weight.ndim != 2 or self.weight.shape[1] != D or self.bias.shape != (self.weight.shape[0],):
            raise ModelError(f"weight {self.weight.shape} / bias {self.bias.shape} "
                             f"inconsistent with input {self.input_shape}")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ModelError("non-finite weights")

    @property
    def n_classes(self):
        return self.weight.shape[0]

    def logits(self, image):
        return self.weight @ image.reshape(-1) + self.bias

    def logits_pullback(self, image, dz):
        return (dz @ self.weight).reshape(self.input_shape)

    def tensors(self):
        return {"weight": self.weight, "bias": self.bias}


class MLPClassifier(_Classifier):
    """One ``tanh`` hidden layer with a softmax head."""

    kind = "builtin-mlp"

    def __init__(self, w1, b1, w2, b2, input_shape):
        super().__init__(input_shape)
        self.w1, self.b1, self.w2, self.b2 = (np.asarray(a, dtype=np.float64) for a in (w1, b1, w2, b2))
        D = int(np.prod(self.input_shape))
        hidden = self.w1.shape[0]
        if (self.w1.shape != (hidden, D) or self.b1.shape != (hidden,)
                or self.w2.ndim != 2 or self.w2.shape[1] != hidden
                or self.b2.shape != (self.w2.shape[0],)):
            raise ModelError("MLP weight shapes are inconsistent with each other or the input")
        if not all(np.all(np.isfinite(a)) for a in (self.w1, self.b1, self.w2, self.b2)):
            raise ModelError("non-finite weights")

    @property
    def n_classes(self):
        return self.w2.shape[0]

    def logits(self, image):
        h = np.tanh(self.w1 @ image.reshape(-1) + self.b1)
        return self.w2 @ h + self.b2

    def logits_pullback(self, image, dz):
        h = np.tanh(self.w1 @ image.reshape(-1) + self.b1)
        dh = (dz @ self.w2) * (1.0 - h * h)
        return (dh @ self.w1).reshape(self.input_shape)

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


class SurrogateDetector:
    """Objectness ``sigmoid(weight * mean_intensity_in_box + bias)`` per requested box.

    Mean intensity averages over the box's pixels and all channels.
    """

    kind = "builtin-detector"
    task = "detect"

    def __init__(self, weight: float, bias: float, input_shape):
        self.weight = float(weight)
        self.bias = float(bias)
        self.input_shape = tuple(int(v) for v in input_shape)
        if not (np.isfinite(self.weight) and np.isfinite(self.bias)):
            raise ModelError("non-finite detector weights")

    def forward(self, image, boxes):
        image = np.asarray(image, dtype=np.float64)
        if image.shape != self.input_shape:
            raise InvalidInputError(f"detector expects input {self.input_shape}, got {image.shape}")
        regions = [BoundingBox.from_obj(b).pixel_slices(image.shape) for b in boxes]
        means = np.array([image[rs, cs].mean() for rs, cs in regions])
        scores = 1.0 / (1.0 + np.exp(-(self.weight * means + self.bias)))

        def pullback(ds):
            grad = np.zeros_like(image)
            for (rs, cs), d, o in zip(regions, np.asarray(ds, dtype=np.float64), scores):
                n = image[rs, cs].size
                grad[rs, cs] += d * o * (1.0 - o) * self.weight / n
            return grad

        return scores, pullback

    def detect(self, image, boxes) -> DetectResult:
        scores, pullback = self.forward(image, boxes)
        loss, dscores, clamped = detection_loss(scores)
        return DetectResult(scores, loss, pullback(dscores), clamped)

    def tensors(self):
        return {"weight": np.array([self.weight]), "bias": np.array([self.bias])}


_KINDS = {
    "builtin-linear": (LinearClassifier, ("weight", "bias")),
    "builtin-mlp": (MLPClassifier, ("w1", "b1", "w2", "b2")),
    "builtin-detector": (SurrogateDetector, ("weight", "bias")),
}


def save_model(model, path) -> None:
    """Write ``<path>`` (JSON sidecar) and ``<path stem>.bin`` (float32 raw grid, one row)."""
    path = Path(path)
    data_path = path.with_suffix(".bin")
    tensors = model.tensors()
    flat = np.concatenate([np.asarray(v, dtype=np.float64).reshape(-1) for v in tensors.values()])
    write_raw(flat[None, :], data_path)
    meta = {
        "kind": model.kind,
        "input_shape": list(model.input_shape),
        "data": data_path.name,
        "tensors": [{"name": k, "shape": list(np.shape(v))} for k, v in tensors.items()],
    }
    path.write_text(json.dumps(meta, indent=2) + "\n")


def load_model(path):
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e.msg}", offset=e.pos) from e
    kind = meta.get("kind")
    if kind not in _KINDS:
        raise ModelError(f"{path}: unknown model kind {kind!r}")
    cls, names = _KINDS[kind]
    flat = read_raw(path.parent / meta["data"]).reshape(-1)
    arrays, pos = {}, 0
    for t in meta["tensors"]:
        n = int(np.prod(t["shape"])) if t["shape"] else 1
        if pos + n > flat.size:
            raise ModelError(f"{path}: weight data shorter than declared tensor shapes")
        arrays[t["name"]] = flat[pos:pos + n].reshape(t["shape"])
        pos += n
    if pos != flat.size:
        raise ModelError(f"{path}: {flat.size - pos} trailing weight values")
    missing = [n for n in names if n not in arrays]
    if missing:
        raise ModelError(f"{path}: missing tensors {missing}")
    args = [arrays[n] for n in names]
    if kind == "builtin-detector":
        args = [float(a.reshape(-1)[0]) for a in args]
    return cls(*args, input_shape=meta["input_shape"])
