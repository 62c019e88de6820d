"""Adam over the flat coefficient vector, with tracing and checkpointing."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .contour import ConfigurationError, FourierCoefficients, default_samples
from .io import FormatError, coefficients_to_json, load_coefficients, save_coefficients
from .models import NumericError
from .objectives import ObjectiveSpec, evaluate
from .raster import CanvasSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    steps: int = 1200
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    init: dict = field(default_factory=lambda: {"type": "circle", "radius": 0.5})
    freeze_c0: bool = False
    log_every: int = 10
    patience: int = 50
    record_wall_time: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in [0, 1)")
        if self.log_every < 1 or self.patience < 1:
            raise ConfigurationError("log_every and patience must be >= 1")
        if self.init.get("type") not in ("circle", "random", "file"):
            raise ConfigurationError(f"unknown init {self.init!r}")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def init_coefficients(cfg: OptimizerConfig, K: int) -> FourierCoefficients:
    """Starting spectrum.

    ``circle``: ``c_1 = radius``.  ``random``: every ``a_k, b_k ~ U(-scale, scale)``
    from ``cfg.seed``, then ``|c_1|`` raised to at least 0.3 keeping its phase.
    ``file``: a coefficient JSON, zero-padded or truncated to ``K``.
    """
    init = cfg.init
    kind = init["type"]
    if kind == "circle":
        return FourierCoefficients.from_dict({1: float(init.get("radius", 0.5))}, K=max(K, 1)).resized(K)
    if kind == "random":
        s = float(init.get("scale", 0.05))
        rng = np.random.default_rng(cfg.seed)
        c = FourierCoefficients(K, rng.uniform(-s, s, 2 * (2 * K + 1))).complex()
        if K >= 1:
            c1 = c[K + 1]
            c[K + 1] = max(abs(c1), 0.3) * np.exp(1j * np.angle(c1))
        return FourierCoefficients.from_complex(c)
    if "path" not in init:
        raise ConfigurationError("file init needs a 'path'")
    return load_coefficients(init["path"]).resized(K)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, cfg: OptimizerConfig):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ConfigurationError("parameter, gradient and state shapes differ")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to Adam")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps_adam), AdamState(m, v, t)


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    final: FourierCoefficients | None = None
    termination: str = ""
    summary: dict = field(default_factory=dict)

    def first_success(self):
        for r in self.records:
            if r["success"]:
                return r["step"]
        return None


def _record(step, res, best, started, cfg):
    rec = {
        "step": step,
        "total": res.value,
        "data": res.data,
        "reg": res.reg,
        "area": res.area,
        "best_total": best,
        "success": res.success,
        "scores": [float(s) for s in res.scores],
    }
    if res.clamped:
        rec["clamped"] = True
    if cfg.record_wall_time:
        rec["wall_time"] = time.perf_counter() - started
    return rec


def run_optimization(objective: ObjectiveSpec, opt: OptimizerConfig, K: int,
                     canvas: CanvasSpec = CanvasSpec(), N: int | None = None,
                     out_dir=None, init: FourierCoefficients | None = None) -> OptimizationTrace:
    """Minimize the objective from ``init`` (or ``init_coefficients(opt, K)``).

    Each record describes the coefficients *before* that step's update.  The
    run stops after ``opt.steps`` updates or once the success rule has held
    for ``opt.patience`` consecutive steps.  With ``out_dir`` set, logged
    records go to ``trace.jsonl`` (plus a final summary line) and
    coefficients are checkpointed every ``log_every`` steps; on an error the
    trace written so far is flushed and the error re-raised.
    """
    N = default_samples(K) if N is None else N
    c = init if init is not None else init_coefficients(opt, K)
    if c.K != K:
        c = c.resized(K)
    params = c.params.copy()
    state = AdamState.zeros(params.size)
    c0 = slice(2 * K, 2 * K + 2)

    trace = OptimizationTrace()
    out = Path(out_dir) if out_dir is not None else None
    sink = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "checkpoints").mkdir(exist_ok=True)
        sink = open(out / "trace.jsonl", "w")

    def emit(obj):
        if sink is not None:
            sink.write(json.dumps(obj) + "\n")

    started = time.perf_counter()
    best = np.inf
    streak = 0
    step = 0
    try:
        for step in range(opt.steps):
            current = FourierCoefficients(K, params)
            res = evaluate(current, objective, canvas, N)
            best = min(best, res.value)
            rec = _record(step, res, best, started, opt)
            trace.records.append(rec)
            logged = step % opt.log_every == 0
            if logged:
                emit(rec)
                if out is not None:
                    save_coefficients(current, out / "checkpoints" / f"step_{step:06d}.json")
                log.debug("step %d total %.6g data %.6g", step, res.value, res.data)
            streak = streak + 1 if res.success else 0
            if streak >= opt.patience:
                trace.termination = "success"
                if not logged:
                    emit(rec)
                break
            grad = res.grad
            if opt.freeze_c0:
                grad = grad.copy()
                grad[c0] = 0.0
            params, state = adam_step(params, grad, state, opt)
        else:
            trace.termination = "budget"
    except Exception as e:
        trace.termination = f"error: {type(e).__name__}: {e}"
        trace.final = FourierCoefficients(K, params)
        emit({"summary": True, "termination": trace.termination, "steps_run": len(trace.records),
              "coefficients": coefficients_to_json(trace.final)})
        if sink is not None:
            sink.close()
        raise

    trace.final = FourierCoefficients(K, params)
    if trace.termination == "budget":
        final = evaluate(trace.final, objective, canvas, N)
    else:
        final = res
    trace.summary = {
        "summary": True,
        "termination": trace.termination,
        "steps_run": len(trace.records),
        "first_success": trace.first_success(),
        "final_total": final.value,
        "final_data": final.data,
        "final_reg": final.reg,
        "final_area": final.area,
        "final_success": final.success,
        "final_scores": [float(s) for s in final.scores],
        "coefficients": coefficients_to_json(trace.final),
    }
    emit(trace.summary)
    if sink is not None:
        sink.close()
        save_coefficients(trace.final, out / "final.json")
    return trace


# -- run-config files -------------------------------------------------------

def load_run_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e.msg}", offset=e.pos) from e
    for section in ("shape", "objective", "optimizer"):
        if section not in doc:
            raise FormatError(f"{path}: missing section {section!r}")
    return doc
