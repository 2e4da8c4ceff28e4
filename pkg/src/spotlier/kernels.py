"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
NumPy fallback in ``_pure``. Set ``SPOTLIER_PURE_PYTHON=1`` to force the
fallback (used by the test suite and the benchmark to compare both).
"""
import importlib
import os

from spotlier import _pure

_NAMES = ("soft_threshold", "extract_patches", "accumulate_patches", "label8",
          "component_stats", "centered_correlate", "grey_erode", "grey_dilate")


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("spotlier._core")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def load_backend(name):
    if name == "python":
        return _pure
    if name == "cython":
        return importlib.import_module("spotlier._core")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("SPOTLIER_PURE_PYTHON", "") not in ("", "0"):
        return _pure
    try:
        return importlib.import_module("spotlier._core")
    except ImportError:
        return _pure


_impl = _select()
BACKEND = _impl.NAME

soft_threshold = _impl.soft_threshold
extract_patches = _impl.extract_patches
accumulate_patches = _impl.accumulate_patches
label8 = _impl.label8
component_stats = _impl.component_stats
centered_correlate = _impl.centered_correlate
grey_erode = _impl.grey_erode
grey_dilate = _impl.grey_dilate
