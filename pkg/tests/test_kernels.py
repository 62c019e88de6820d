import json
import os
import subprocess
import sys

import numpy as np
import pytest

from fourier_shapes import CanvasSpec, _backend, bench, rasterize_backward, rasterize_raw
from fourier_shapes import _kernels_py

from _shapes import random_coefficients

compiled_only = pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")


def _inputs(rng, m=300, n=64):
    f, g, fp, gp = (rng.normal(size=n) for _ in range(4))
    px, py = rng.uniform(-1, 1, m), rng.uniform(-1, 1, m)
    return px, py, f, g, fp, gp


def test_python_forward_matches_direct_sum(rng):
    px, py, f, g, fp, gp = _inputs(rng, m=7, n=11)
    got = _kernels_py.winding_forward(px, py, f, g, fp, gp, 1e-9)
    for i in range(7):
        dx, dy = f - px[i], g - py[i]
        assert got[i] == pytest.approx(np.mean((dx * gp - dy * fp) / (dx * dx + dy * dy + 1e-9)), rel=1e-12)


@compiled_only
def test_backends_agree(rng):
    px, py, f, g, fp, gp = _inputs(rng)
    gw = rng.normal(size=px.size)
    gw[::3] = 0.0
    fast, slow = _backend.get("compiled"), _backend.get("python")
    np.testing.assert_allclose(fast.winding_forward(px, py, f, g, fp, gp, 1e-9),
                               slow.winding_forward(px, py, f, g, fp, gp, 1e-9), rtol=1e-12, atol=1e-14)
    for a, b in zip(fast.winding_backward(px, py, f, g, fp, gp, 1e-9, gw),
                    slow.winding_backward(px, py, f, g, fp, gp, 1e-9, gw)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@compiled_only
def test_backends_agree_end_to_end(rng):
    c = random_coefficients(rng, 5)
    canvas = CanvasSpec(40, 36)
    up = rng.normal(size=canvas.shape)
    a = rasterize_raw(c, canvas, 128, backend="compiled").values
    b = rasterize_raw(c, canvas, 128, backend="python").values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    ga = rasterize_backward(c, canvas, 128, up, backend="compiled")
    gb = rasterize_backward(c, canvas, 128, up, backend="python")
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-12 * np.abs(gb).max())


@pytest.mark.parametrize("name", ["python", pytest.param("compiled", marks=compiled_only)])
def test_zero_and_empty_adjoints(rng, name):
    k = _backend.get(name)
    px, py, f, g, fp, gp = _inputs(rng)
    for grad in k.winding_backward(px, py, f, g, fp, gp, 1e-9, np.zeros(px.size)):
        assert not grad.any()
    assert k.winding_forward(px[:0], py[:0], f, g, fp, gp, 1e-9).shape == (0,)


def _backend_in_subprocess(value):
    env = {**os.environ, "FOURIER_SHAPES_BACKEND": value}
    out = subprocess.run([sys.executable, "-c", "import fourier_shapes; print(fourier_shapes.backend)"],
                         env=env, capture_output=True, text=True)
    return out.returncode, out.stdout.strip(), out.stderr


def test_env_var_forces_fallback():
    assert _backend_in_subprocess("python")[:2] == (0, "python")


def test_env_var_rejects_unknown_value():
    code, _, err = _backend_in_subprocess("gpu")
    assert code != 0 and "FOURIER_SHAPES_BACKEND" in err


@compiled_only
def test_auto_prefers_compiled():
    assert _backend_in_subprocess("auto")[:2] == (0, "compiled")


def test_get_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_bench_report():
    report = bench.run(size=24, N=32, K=3, repeat=1)
    json.dumps(report)
    rows = [r for r in report["results"] if r["available"]]
    assert rows and all(r["forward_s"] > 0 for r in rows)
    for r in rows[1:]:
        assert r["max_raw_diff"] < 1e-12 and r["max_grad_rel_diff"] < 1e-10
