"""Classical spot detectors used for comparison: LoG, DoG and top-hat.

All three produce a nonnegative response normalized to [0, 1] and share
the thresholding and barycenter step of :mod:`spotlier.detection`.
Borders use symmetric (edge-repeating) reflection.
"""
from dataclasses import dataclass

import numpy as np

from spotlier import kernels
from spotlier.detection import normalize_response, threshold_and_group

METHODS = ("log", "dog", "gsoth")


@dataclass(frozen=True)
class KernelSpec:
    size: int = 5
    sigma: float = 0.8
    sigma2: float = None

    def __post_init__(self):
        if self.size < 3 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 3, got {self.size}")
        if self.sigma <= 0 or (self.sigma2 is not None and self.sigma2 <= 0):
            raise ValueError("sigmas must be positive")
        if self.sigma2 is not None and not self.sigma < self.sigma2:
            raise ValueError(f"DoG needs sigma < sigma2, got {self.sigma} and {self.sigma2}")


def _offsets(size):
    r = size // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy).astype(np.float64)


def gaussian_kernel(size, sigma):
    g = np.exp(-_offsets(size) / (2 * sigma * sigma))
    return g / g.sum()


def log_kernel(size, sigma):
    """Negated Laplacian of Gaussian, shifted to zero sum (bright blobs > 0)."""
    r2 = _offsets(size)
    s2 = sigma * sigma
    k = -(r2 - 2 * s2) / (s2 * s2) * np.exp(-r2 / (2 * s2)) / (2 * np.pi * s2)
    return k - k.mean()


def dog_kernel(size, sigma_small, sigma_large):
    k = gaussian_kernel(size, sigma_small) - gaussian_kernel(size, sigma_large)
    return k - k.mean()


def footprint(shape="square"):
    if shape == "square":
        return np.ones((3, 3), dtype=bool)
    if shape == "cross":
        return np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    raise ValueError(f"unknown footprint {shape!r}")


def _check_size(img, size):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < size:
        raise ValueError(f"image {img.shape} smaller than {size}x{size}")
    return img


def log_filter(img, spec=KernelSpec(5, 0.8)):
    img = _check_size(img, spec.size)
    return kernels.centered_correlate(img, log_kernel(spec.size, spec.sigma), 0.0)


def log_response(img, spec=KernelSpec(5, 0.8)):
    return normalize_response(log_filter(img, spec))


def dog_response(img, spec=KernelSpec(5, 0.5, 0.8)):
    if spec.sigma2 is None:
        raise ValueError("DoG needs two sigmas")
    img = _check_size(img, spec.size)
    k = dog_kernel(spec.size, spec.sigma, spec.sigma2)
    return normalize_response(kernels.centered_correlate(img, k, 0.0))


def smooth(img, spec=KernelSpec(5, 0.8)):
    img = _check_size(img, spec.size)
    return kernels.centered_correlate(img, gaussian_kernel(spec.size, spec.sigma), 1.0)


def opening(img, fp):
    return kernels.grey_dilate(kernels.grey_erode(img, fp), fp)


def tophat(img, fp, smoothing=KernelSpec(5, 0.8), subtract_from="smoothed"):
    """Unnormalized top-hat: base minus the opening of the smoothed image.

    ``smoothing=None`` skips the pre-smoothing. ``subtract_from`` picks
    whether the opening is subtracted from the smoothed or the original
    image.
    """
    img = _check_size(img, fp.shape[0])
    base = img if smoothing is None else smooth(img, smoothing)
    opened = opening(base, fp)
    if subtract_from == "smoothed":
        return base - opened
    if subtract_from == "original":
        return img - opened
    raise ValueError(f"subtract_from must be 'smoothed' or 'original', got {subtract_from!r}")


def gsoth_response(img, shape="square", smoothing=KernelSpec(5, 0.8), subtract_from="smoothed"):
    return normalize_response(tophat(img, footprint(shape), smoothing, subtract_from))


def baseline_response(img, method, **kw):
    if method == "log":
        return log_response(img, **kw)
    if method == "dog":
        return dog_response(img, **kw)
    if method == "gsoth":
        return gsoth_response(img, **kw)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def baseline_detect(img, method, level, frame="", **kw):
    return threshold_and_group(baseline_response(img, method, **kw), level, frame)
