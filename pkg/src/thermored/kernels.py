"""Backend selection for the stepping kernels.

The compiled extension is used when importable; setting the environment
variable ``THERMORED_PURE_PYTHON=1`` forces the numpy fallback.
"""
import importlib
import os

_NAMES = ("LTIStepper", "LTIZone", "TVZone", "SeparateZone", "run_building",
          "NetworkSolver", "power_law",
          "STATUS_OK", "STATUS_SWEEPS", "STATUS_INNER", "STATUS_SINGULAR")


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("thermored._kernels")
    if name == "python":
        return importlib.import_module("thermored._kernels_py")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("THERMORED_PURE_PYTHON"):
        return load_backend("python")
    try:
        return load_backend("cython")
    except ImportError:
        return load_backend("python")


_backend = _select()
BACKEND = _backend.BACKEND
globals().update({name: getattr(_backend, name) for name in _NAMES})

__all__ = list(_NAMES) + ["BACKEND", "load_backend"]
