"""Turn a run-config document into live objects.

Layout::

    {
      "shape":       {"K": 8, "N": 256, "canvas": {"width": 32, "height": 32}},
      "objective":   {"mode": "generate", "target_label": 1,
                      "model": {"kind": "builtin-mlp", "weights": "mlp.json"},
                      "image": "scene.png", "boxes": [[cx, cy, w, h]],
                      "patch_scale": 0.6, "patch_color": [1, 1, 1]},
      "regularizer": {"lambda": 2, "gamma": 0.25, "lambda_reg": 0.1, "lambda_area": 1.0},
      "optimizer":   {"steps": 500, "lr": 0.01, "seed": 0,
                      "init": {"type": "random", "scale": 0.05}}
    }

Relative paths resolve against ``base_dir`` (the config file's directory).
Adapter models use ``{"kind": "external-adapter", "command": [...],
"task": "classify"|"detect", "timeout": 30}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .adapter import AdapterModel
from .contour import ConfigurationError, default_samples
from .io import read_image
from .models import load_model
from .objectives import ObjectiveSpec
from .optimizer import OptimizerConfig
from .raster import CanvasSpec
from .regularizers import RegularizerConfig


@dataclass
class RunSetup:
    objective: ObjectiveSpec
    optimizer: OptimizerConfig
    K: int
    N: int
    canvas: CanvasSpec


def _path(base, p):
    p = Path(p)
    return p if p.is_absolute() else Path(base) / p


def build_model(doc, base_dir="."):
    kind = doc.get("kind")
    if kind in ("builtin-linear", "builtin-mlp", "builtin-detector"):
        model = load_model(_path(base_dir, doc["weights"]))
        if model.kind != kind:
            raise ConfigurationError(f"weights file holds a {model.kind}, config says {kind}")
        return model
    if kind == "external-adapter":
        command = doc["command"]
        if isinstance(command, str):
            command = command.split()
        shape = doc.get("input_shape")
        return AdapterModel(command, task=doc.get("task", "classify"),
                            timeout=doc.get("timeout", 30.0), input_shape=shape)
    raise ConfigurationError(f"unknown model kind {kind!r}")


def build_run(doc, base_dir=".") -> RunSetup:
    shape = doc["shape"]
    K = int(shape["K"])
    N = int(shape.get("N") or default_samples(K))
    canvas = CanvasSpec.from_dict(shape.get("canvas", {}))

    reg = RegularizerConfig.from_dict(doc.get("regularizer", {}))
    obj = dict(doc["objective"])
    mode = obj.pop("mode")
    label = obj.pop("target_label", obj.pop("true_label", None))
    image = obj.pop("image", None)
    if isinstance(image, str):
        image = read_image(_path(base_dir, image))
    model = build_model(obj.pop("model"), base_dir)
    spec = ObjectiveSpec(
        mode=mode,
        model=model,
        label=label,
        image=image,
        boxes=obj.pop("boxes", []),
        patch_scale=obj.pop("patch_scale", 0.6),
        patch_color=obj.pop("patch_color", 1.0),
        reg=reg,
        success_threshold=obj.pop("success_threshold", 0.5),
    )
    if obj:
        raise ConfigurationError(f"unknown objective keys {sorted(obj)}")

    opt_doc = dict(doc["optimizer"])
    init = opt_doc.get("init")
    if isinstance(init, dict) and init.get("type") == "file":
        opt_doc["init"] = {**init, "path": str(_path(base_dir, init["path"]))}
    return RunSetup(spec, OptimizerConfig.from_dict(opt_doc), K, N, canvas)
