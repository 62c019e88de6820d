import numpy as np
import pytest

from fourier_shapes import CanvasSpec, FourierCoefficients, RegularizerConfig, reg_loss, toys
from fourier_shapes.contour import ConfigurationError
from fourier_shapes.models import (
    BoundingBox,
    ClassifyResult,
    DetectResult,
    LinearClassifier,
    NumericError,
    SurrogateDetector,
    detection_loss,
)
from fourier_shapes.objectives import (
    ObjectiveSpec,
    evaluate,
    loss_generate,
    loss_patch_attack,
    loss_saliency_keep,
    loss_saliency_occlude,
)
from fourier_shapes.oracles import FiniteDiffConfig, fd_gradient, gradient_agreement
from fourier_shapes.raster import rasterize_raw

CANVAS = CanvasSpec(32, 32)
COVER = FourierCoefficients.from_dict({1: 3.0, 2: 1.5})  # winds once around every canvas pixel


class FixedClassifier:
    """Returns the same probabilities for every image; zero pixel gradient."""

    def __init__(self, probs, shape=(32, 32, 1)):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.input_shape = shape

    def classify(self, image, target):
        return ClassifyResult(self.probs, float(-np.log(self.probs[target])), np.zeros(self.input_shape))


class FixedDetector:
    def __init__(self, scores):
        self.scores = np.asarray(scores, dtype=np.float64)

    def detect(self, image, boxes):
        loss, _, clamped = detection_loss(self.scores)
        return DetectResult(self.scores, loss, np.zeros(np.shape(image)), clamped)


def _start(rng, K):
    c = rng.uniform(-0.08, 0.08, 2 * K + 1) + 1j * rng.uniform(-0.08, 0.08, 2 * K + 1)
    c[K + 1] = rng.uniform(0.4, 0.6)
    return FourierCoefficients.from_complex(c)


def _spec(mode, reg=RegularizerConfig()):
    if mode == "generate":
        return ObjectiveSpec(mode, toys.exp1_classifier(32), label=toys.STAR, reg=reg)
    if mode.startswith("saliency"):
        image, model = toys.exp2_scene(32)
        return ObjectiveSpec(mode, model, label=0, image=image, reg=reg)
    image, det, boxes = toys.exp3_scene()
    return ObjectiveSpec(mode, det, image=image, boxes=boxes, reg=reg)


MODES = ["generate", "saliency-keep", "saliency-occlude", "patch-attack"]


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(mode, seed):
    rng = np.random.default_rng(seed)
    c = _start(rng, 3)
    spec = _spec(mode)
    analytic = evaluate(c, spec, CANVAS).grad
    loss = lambda p: evaluate(c.with_params(p), spec, CANVAS).value  # noqa: E731
    probe = lambda p: rasterize_raw(c.with_params(p), CANVAS).values  # noqa: E731
    fd = fd_gradient(loss, c.params, kink_probe=probe)
    ok = gradient_agreement(analytic, fd) | fd.flagged
    # stragglers at h=1e-5 are re-probed with a smaller step to separate
    # truncation error from a wrong gradient
    for i in np.flatnonzero(~ok):
        fine = fd_gradient(lambda q: loss(np.where(np.arange(q.size) == i, q, c.params)),
                           c.params, FiniteDiffConfig(h=1e-7))
        assert abs(analytic[i] - fine.grad[i]) <= 1e-3 * abs(fine.grad[i]) + 1e-6
    assert ok.mean() >= 0.75


def test_generate_pro_area_gradient_sign():
    # small canvas so the +1-per-pixel logit does not saturate the softmax
    canvas = CanvasSpec(8, 8)
    w = np.zeros((2, 64))
    w[1] = 1.0
    model = LinearClassifier(w, np.zeros(2), (8, 8, 1))
    c = FourierCoefficients.from_dict({1: 0.3}, K=3)
    spec = ObjectiveSpec("generate", model, label=1)
    _, grad = loss_generate(c, spec, canvas)
    fd = fd_gradient(lambda p: loss_generate(c.with_params(p), spec, canvas)[0], c.params)
    a1 = 2 * (1 + 3)
    assert grad[a1] < 0 and fd.grad[a1] < 0


def test_generate_certain_target_has_zero_data():
    spec = ObjectiveSpec("generate", FixedClassifier([1.0, 0.0]), label=0)
    r = evaluate(FourierCoefficients.from_dict({1: 0.5}, K=2), spec, CANVAS)
    assert r.data == 0.0 and r.value == 0.0


def test_keep_full_mask_confident_model_is_reg_only():
    image = np.full((32, 32, 1), 0.5)
    model = LinearClassifier(np.zeros((2, 1024)), np.array([60.0, 0.0]), (32, 32, 1))
    reg = RegularizerConfig(lambda_area=0.0)
    spec = ObjectiveSpec("saliency-keep", model, label=0, image=image, reg=reg)
    value, _ = loss_saliency_keep(COVER, image, spec, CANVAS)
    expected = reg.lambda_reg * reg_loss(COVER, reg)[0]
    assert expected == pytest.approx(0.075)
    assert value == pytest.approx(expected, abs=1e-12)


def test_occlude_full_mask_area_is_minus_one():
    image = np.full((32, 32, 1), 0.5)
    spec = ObjectiveSpec("saliency-occlude", FixedClassifier([0.3, 0.7]), label=0, image=image,
                         reg=RegularizerConfig(lambda_area=1.0))
    r = evaluate(COVER, spec, CANVAS)
    assert r.area == pytest.approx(1.0, abs=1e-9)
    assert r.value - r.data - 0.1 * r.reg == pytest.approx(-1.0, abs=1e-9)
    assert r.data == pytest.approx(np.log(0.3), abs=1e-15)


def test_keep_occlude_antisymmetry(rng):
    reg = RegularizerConfig(lambda_reg=0.0, lambda_area=0.7)
    keep, occl = _spec("saliency-keep", reg), _spec("saliency-occlude", reg)
    for _ in range(5):
        c = _start(rng, 4)
        a, b = evaluate(c, keep, CANVAS), evaluate(c, occl, CANVAS)
        assert a.value + b.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(a.grad, -b.grad, rtol=0, atol=1e-12)


def test_patch_closed_forms():
    image = np.full((20, 20, 3), 0.5)
    box = BoundingBox(10, 10, 8, 8)
    c = FourierCoefficients.from_dict({1: 0.5}, K=2)
    spec = ObjectiveSpec("patch-attack", FixedDetector([0.0]), image=image, boxes=[box])
    assert evaluate(c, spec, CANVAS).data == 0.0
    spec.model = SurrogateDetector(0.0, 0.0, image.shape)
    r = evaluate(c, spec, CANVAS)
    assert r.data == pytest.approx(0.6931471805599453, abs=1e-15)
    assert not r.success  # 0.5 is not below the threshold
    spec.model = FixedDetector([1.0])
    r = evaluate(c, spec, CANVAS)
    assert r.clamped and np.isfinite(r.value)


def test_patch_attack_wrapper_replaces_image(rng):
    image, det, boxes = toys.exp3_scene()
    spec = ObjectiveSpec("patch-attack", det, image=np.zeros_like(image), boxes=boxes)
    c = _start(rng, 3)
    v, g = loss_patch_attack(c, image, spec, CANVAS)
    ref = evaluate(c, ObjectiveSpec("patch-attack", det, image=image, boxes=boxes), CANVAS)
    assert v == ref.value
    np.testing.assert_array_equal(g, ref.grad)


def test_mode_checks():
    image = np.zeros((32, 32, 1))
    model = FixedClassifier([0.5, 0.5])
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("draw", model, label=0)
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("generate", model)
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("saliency-keep", model, label=0)
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("patch-attack", model, image=image)
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("patch-attack", model, image=image, boxes=[[4, 4, 2, 2]], patch_scale=0.0)
    spec = ObjectiveSpec("saliency-keep", model, label=0, image=image)
    with pytest.raises(ConfigurationError):
        loss_saliency_occlude(COVER, image, spec, CANVAS)


def test_non_finite_model_loss():
    class Broken(FixedClassifier):
        def classify(self, image, target):
            r = super().classify(image, target)
            r.nll = float("nan")
            return r

    spec = ObjectiveSpec("generate", Broken([0.5, 0.5]), label=0)
    with pytest.raises(NumericError):
        evaluate(FourierCoefficients.from_dict({1: 0.5}, K=1), spec, CANVAS)
