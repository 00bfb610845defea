"""Kernel backend selection.

The compiled ``_ckernels`` module is used when it was built and
``FPLAB_PURE_PYTHON`` is unset; otherwise the numpy versions are used.
``backend()`` reports the active choice and ``load(name)`` returns either
module explicitly (the benchmark uses it to compare both).
"""
import importlib
import os

_NAMES = (
    "norm_l2", "norm_linf", "dist_l2", "dist_linf", "combine", "linear_scale",
    "rotation_hard", "piecewise_scale", "piecewise_slope", "ball_project",
    "box_project", "exp_shift",
)


def load(name):
    """Return the kernel module for ``name`` in {"cython", "python"}."""
    if name == "cython":
        return importlib.import_module("fplab._ckernels")
    if name == "python":
        return importlib.import_module("fplab._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("FPLAB_PURE_PYTHON"):
    _impl = load("python")
else:
    try:
        _impl = load("cython")
    except ImportError:
        _impl = load("python")

for _n in _NAMES:
    globals()[_n] = getattr(_impl, _n)


def backend():
    return _impl.BACKEND
