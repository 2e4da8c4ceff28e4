"""From an estimated outlier matrix to point detections."""
from dataclasses import dataclass

import numpy as np

from spotlier import kernels
from spotlier.imaging import PatchMatrix, extract_patches, make_grid, reconstruct_from_patches
from spotlier.points import DetectionSet
from spotlier.robust_coding import RobustCodingProblem, robust_sparse_code


@dataclass
class OutlierImage:
    values: np.ndarray  # normalized to [0, 1]
    coverage: np.ndarray


@dataclass
class DetectParams:
    beta: float
    alpha: float = 1e-5
    patch_size: int = 27
    overlap: float = 0.5
    level: float = 0.07
    mu0: float = 1.0
    max_iters: int = 500

    def validate(self):
        if self.beta < 0 or self.alpha < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not 0 <= self.level <= 1:
            raise ValueError(f"level must be in [0, 1], got {self.level}")
        if not 0 <= self.overlap < 1:
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.patch_size < 1:
            raise ValueError("patch_size must be positive")


def normalize_response(values):
    """Clamp at zero and divide by the maximum; all-zero input stays zero."""
    values = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    peak = values.max(initial=0.0)
    if peak > 0:
        values = values / peak
    return values


def outlier_image(r_hat, grid):
    """Positive part of the outliers, overlap-averaged, max-normalized."""
    pm = PatchMatrix(np.maximum(np.asarray(r_hat, dtype=np.float64), 0.0), grid)
    img, coverage = reconstruct_from_patches(pm)
    return OutlierImage(normalize_response(img), coverage)


def threshold_and_group(values, level, frame=""):
    """One detection per 8-connected group of pixels strictly above ``level``.

    Each detection sits at the unweighted mean of its pixel coordinates and
    is scored with the group's peak value.
    """
    if not 0 <= level <= 1:
        raise ValueError(f"level must be in [0, 1], got {level}")
    if isinstance(values, OutlierImage):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    labels, n = kernels.label8(values > level)
    if n == 0:
        return DetectionSet(frame)
    row_mean, col_mean, peak, _ = kernels.component_stats(labels, n, values)
    return DetectionSet(frame, np.stack([col_mean, row_mean], axis=1), peak)


def detect_frame(img, d, params, frame="", trace=False):
    """Run the full pipeline on one frame.

    Returns ``(detections, outlier_image, coding_result)``.
    """
    params.validate()
    grid = make_grid(img.shape[0], img.shape[1], params.patch_size, params.overlap)
    if d.shape[0] != grid.n_pixels:
        raise ValueError(
            f"dictionary patch dimension {d.shape[0]} != patch_size^2 = {grid.n_pixels}")
    pm = extract_patches(img, grid)
    prob = RobustCodingProblem(pm.values, d, params.alpha, params.beta)
    result = robust_sparse_code(prob, mu0=params.mu0, max_iters=params.max_iters, trace=trace)
    oi = outlier_image(result.r, grid)
    return threshold_and_group(oi.values, params.level, frame), oi, result
