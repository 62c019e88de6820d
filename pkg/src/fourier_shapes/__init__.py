"""Fourier-series shapes, differentiable winding-number rasterization, shape optimization."""

from ._backend import name as backend
from .contour import (
    ConfigurationError,
    ContourSamples,
    FourierCoefficients,
    InvalidInputError,
    amplitude_spectrum,
    evaluate_contour,
    evaluate_derivative,
    sample_contour,
)
from .objectives import ObjectiveSpec, evaluate
from .optimizer import OptimizerConfig, OptimizationTrace, adam_step, init_coefficients, run_optimization
from .raster import (
    CanvasSpec,
    RasterGrid,
    normalize,
    polygonize,
    rasterize,
    rasterize_backward,
    rasterize_raw,
    winding_number,
)
from .regularizers import RegularizerConfig, area_term, fundamental_and_harmonic_sums, reg_loss

__version__ = "0.1.0"
