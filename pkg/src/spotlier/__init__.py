"""Spot detection by robust sparse coding of overlapping image patches."""
from spotlier.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
