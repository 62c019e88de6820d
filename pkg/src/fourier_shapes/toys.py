"""Constructed desk-scale scenes with fixed, hand-set model weights.

exp1  three-class template MLP on 32x32 shape masks (disk / five-lobed star / bar)
exp2  quadrant-evidence image with a linear classifier whose evidence weights
      live only in the upper-right quadrant
exp3  dark figure in a bright scene with a mean-brightness surrogate detector
"""

from __future__ import annotations

import numpy as np

from .models import BoundingBox, LinearClassifier, MLPClassifier, SurrogateDetector
from .raster import CanvasSpec

DISK, STAR, BAR = 0, 1, 2


def _polar(canvas: CanvasSpec):
    xs, ys = canvas.pixel_centres()
    X, Y = np.meshgrid(xs, ys)
    return X, Y, np.hypot(X, Y), np.arctan2(Y, X)


def exp1_templates(size: int = 32):
    X, Y, r, th = _polar(CanvasSpec(size, size))
    disk = r < 0.55
    star = r < 0.5 + 0.25 * np.cos(5 * th)
    bar = (np.abs(X) < 0.8) & (np.abs(Y) < 0.25)
    return np.stack([disk, star, bar]).astype(np.float64)


def exp1_classifier(size: int = 32) -> MLPClassifier:
    """Hidden unit ``c`` scores overlap with template ``c`` minus spill outside it."""
    T = exp1_templates(size)
    w1 = (2.0 * T - 1.0) / T.sum(axis=(1, 2), keepdims=True)
    w1 = 3.0 * w1.reshape(3, -1)
    b1 = np.zeros(3)
    w2 = 6.0 * np.eye(3)
    b2 = np.zeros(3)
    return MLPClassifier(w1, b1, w2, b2, input_shape=(size, size, 1))


def exp2_scene(size: int = 32):
    """Image and classifier; class 0 is carried by a blob in the upper-right quadrant.

    Image rows follow the canvas convention (row 0 at ``y_min``), so the
    "upper-right" quadrant is ``x > 0, y > 0`` in canvas coordinates.
    """
    X, Y, _, _ = _polar(CanvasSpec(size, size))
    blob = np.exp(-((X - 0.55) ** 2 + (Y - 0.55) ** 2) / (2 * 0.15 ** 2))
    quadrant = (X > 0) & (Y > 0)
    image = np.clip(0.35 + 0.6 * blob, 0.0, 1.0)[:, :, None]
    evidence = np.where(quadrant, blob, 0.0)
    evidence = evidence / evidence.sum()
    w = np.zeros((2, size * size))
    w[0] = 10.0 * evidence.reshape(-1)
    b = np.array([0.0, 3.0])
    return image, LinearClassifier(w, b, input_shape=(size, size, 1))


def exp3_scene(size: int = 96):
    """Dark figure on a light background, one box around it, detector scoring dark boxes."""
    image = np.full((size, size, 3), 0.8)
    box = BoundingBox(cx=size / 2, cy=size / 2, w=size / 3, h=size * 0.6, label="person")
    rs, cs = box.pixel_slices(image.shape)
    image[rs, cs] = 0.1
    detector = SurrogateDetector(weight=-12.0, bias=4.0, input_shape=image.shape)
    return image, detector, [box]
