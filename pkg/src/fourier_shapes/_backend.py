"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
``FOURIER_SHAPES_BACKEND=python`` forces the fallback, ``=compiled`` makes a
missing extension an import error.
"""

import os

from . import _kernels_py

_choice = os.environ.get("FOURIER_SHAPES_BACKEND", "auto").lower()

if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"unknown FOURIER_SHAPES_BACKEND={_choice!r}")

compiled = None
if _choice != "python":
    try:
        from . import _kernels as compiled
    except ImportError:
        if _choice == "compiled":
            raise

kernels = compiled if compiled is not None else _kernels_py
name = "compiled" if compiled is not None else "python"


def get(which: str | None = None):
    """Return a kernel module by name (``"compiled"``/``"python"``) or the active one."""
    if which is None:
        return kernels
    if which == "python":
        return _kernels_py
    if which == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {which!r}")
