"""Time the compiled and numpy winding kernels on the same rasterization."""

import argparse
import json
import time

import numpy as np

from . import _backend
from .contour import FourierCoefficients
from .raster import CanvasSpec, rasterize_backward, rasterize_raw


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(size=224, N=256, K=8, repeat=3, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-0.05, 0.05, 2 * K + 1) + 1j * rng.uniform(-0.05, 0.05, 2 * K + 1)
    c[K + 1] = 0.6
    coeffs = FourierCoefficients.from_complex(c)
    canvas = CanvasSpec(size, size)
    upstream = rng.normal(size=canvas.shape)

    rows = []
    ref = None
    for name in ("compiled", "python"):
        try:
            _backend.get(name)
        except RuntimeError:
            rows.append({"backend": name, "available": False})
            continue
        raw = rasterize_raw(coeffs, canvas, N, backend=name)
        grad = rasterize_backward(coeffs, canvas, N, upstream, raw=raw, backend=name)
        fwd = _best_of(lambda: rasterize_raw(coeffs, canvas, N, backend=name), repeat)
        bwd = _best_of(lambda: rasterize_backward(coeffs, canvas, N, upstream, raw=raw, backend=name), repeat)
        row = {"backend": name, "available": True, "forward_s": fwd, "backward_s": bwd}
        if ref is None:
            ref = (raw.values, grad)
        else:
            row["max_raw_diff"] = float(np.abs(raw.values - ref[0]).max())
            row["max_grad_rel_diff"] = float(np.abs(grad - ref[1]).max() / np.abs(ref[1]).max())
        rows.append(row)
    return {"size": size, "N": N, "K": K, "pixels_x_samples": size * size * N, "results": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    report = run(args.size, args.N, args.K, args.repeat)
    print(json.dumps(report, indent=2))
    rows = {r["backend"]: r for r in report["results"] if r.get("available")}
    if len(rows) == 2:
        for phase in ("forward_s", "backward_s"):
            print(f"{phase[:-2]:>8}: compiled {rows['compiled'][phase] * 1e3:8.1f} ms   "
                  f"python {rows['python'][phase] * 1e3:8.1f} ms   "
                  f"speedup {rows['python'][phase] / rows['compiled'][phase]:5.1f}x")
    return 0


if __name__ == "__main__":
    main()
