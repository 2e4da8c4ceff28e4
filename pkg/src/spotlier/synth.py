"""Seeded synthetic frames: dictionary-built backgrounds, Gaussian spots, noise.

Every random draw comes from a stream keyed by ``(seed, purpose, frame)``,
so frames can be generated in any order or in parallel with identical
output.
"""
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from spotlier.imaging import PatchMatrix, atomic_write, make_grid, reconstruct_from_patches, save_image
from spotlier.points import AnnotationSet, write_annotations

_ATOMS, _BACKGROUND, _SPOTS, _NOISE = 1, 2, 3, 4


@dataclass(frozen=True)
class SynthSpec:
    frames: int = 10
    image_h: int = 274
    image_w: int = 384
    patch_size: int = 27
    overlap: float = 0.5
    background_atoms: int = 20
    background_sparsity: int = 3
    background_max: float = 0.6
    smooth_weight: float = 0.3
    ridges_per_atom: int = 2
    ridge_width: float = 1.2
    spots: int = 10
    spot_amplitude: float = 0.5
    spot_sigma: float = 1.5
    min_separation: float = 25.0
    noise_sigma: float = 0.01
    seed: int = 0
    first_frame: int = 0

    def __post_init__(self):
        counts = (self.frames, self.background_atoms, self.background_sparsity,
                  self.ridges_per_atom, self.spots)
        if any(c < 0 for c in counts):
            raise ValueError("counts must be non-negative")
        if self.spot_sigma <= 0 or self.ridge_width <= 0:
            raise ValueError("sigmas must be positive")
        if self.spot_amplitude <= 0:
            raise ValueError("spot amplitude must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.background_sparsity > self.background_atoms:
            raise ValueError("background sparsity exceeds atom count")


def _rng(seed, purpose, index=0):
    return np.random.default_rng([int(seed), purpose, int(index)])


def planted_atoms(spec):
    """Nonnegative unit-norm background atoms, shape (patch_size**2, K).

    Each atom is a smooth low-frequency field plus a few thin bright
    ridges, loosely imitating fibrous tissue.
    """
    n = spec.patch_size
    rng = _rng(spec.seed, _ATOMS)
    yy, xx = np.mgrid[0:n, 0:n] / (n - 1)
    atoms = np.zeros((n * n, spec.background_atoms))
    for k in range(spec.background_atoms):
        field = np.zeros((n, n))
        for _ in range(3):
            fy, fx = rng.uniform(0.3, 1.5, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            field += rng.uniform(0.2, 1.0) * np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
        field = spec.smooth_weight * (field - field.min()) / max(np.ptp(field), 1e-12)
        for _ in range(spec.ridges_per_atom):
            theta = rng.uniform(0, np.pi)
            cy, cx = rng.uniform(0.2, 0.8, size=2)
            bend = rng.uniform(-1.5, 1.5)
            # signed distance (in pixels) to a gently curved line through (cy, cx)
            u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
            v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
            dist = (v - bend * u * u) * (n - 1)
            field += np.exp(-dist * dist / (2 * spec.ridge_width ** 2))
        col = field.T.reshape(-1)  # column-major within the patch
        atoms[:, k] = col / np.linalg.norm(col)
    return atoms


def _covering_grid(spec):
    """Patch grid on a canvas just large enough to cover the whole frame."""
    base = make_grid(spec.image_h, spec.image_w, spec.patch_size, spec.overlap)
    stride = base.stride
    rows = max(1, math.ceil((spec.image_h - spec.patch_size) / stride) + 1)
    cols = max(1, math.ceil((spec.image_w - spec.patch_size) / stride) + 1)
    h = (rows - 1) * stride + spec.patch_size
    w = (cols - 1) * stride + spec.patch_size
    return make_grid(h, w, spec.patch_size, spec.overlap)


def make_background(spec, frame_index, atoms=None):
    """Background in [0, background_max] built from sparse nonnegative atom mixtures."""
    if spec.background_sparsity == 0 or spec.background_atoms == 0:
        return np.zeros((spec.image_h, spec.image_w))
    atoms = planted_atoms(spec) if atoms is None else atoms
    grid = _covering_grid(spec)
    rng = _rng(spec.seed, _BACKGROUND, frame_index)
    k = atoms.shape[1]
    codes = np.zeros((k, grid.n_patches))
    for col in range(grid.n_patches):
        chosen = rng.choice(k, size=spec.background_sparsity, replace=False)
        codes[chosen, col] = rng.uniform(0.3, 1.0, size=spec.background_sparsity)
    canvas, _ = reconstruct_from_patches(PatchMatrix(atoms @ codes, grid))
    img = canvas[: spec.image_h, : spec.image_w]
    # scale only, so backgrounds stay exact nonnegative mixtures of the atoms
    hi = img.max()
    if hi <= 0:
        return np.zeros_like(img)
    return img / hi * spec.background_max


def spot_region(spec):
    """Row/col bounds where spot centers may fall: inside the analysed area."""
    grid = make_grid(spec.image_h, spec.image_w, spec.patch_size, spec.overlap)
    margin = int(math.ceil(2 * spec.spot_sigma))
    return (margin, grid.covered_h - margin), (margin, grid.covered_w - margin)


def implant_spots(img, spec, frame_index, frame=""):
    """Add Gaussian spots at well-separated integer centers.

    Returns ``(image, annotations)``; the image is clamped to [0, 1].
    """
    img = np.asarray(img, dtype=np.float64)
    if spec.spots == 0:
        return img.copy(), AnnotationSet(frame)
    rng = _rng(spec.seed, _SPOTS, frame_index)
    (r0, r1), (c0, c1) = spot_region(spec)
    if r1 <= r0 or c1 <= c0:
        raise ValueError("frame too small to hold spots")
    centers = []
    attempts = 0
    sep2 = spec.min_separation ** 2
    while len(centers) < spec.spots:
        if attempts >= 10 * spec.spots:
            raise ValueError(
                f"could not place {spec.spots} spots {spec.min_separation} px apart "
                f"after {attempts} attempts (placed {len(centers)})")
        attempts += 1
        r = int(rng.integers(r0, r1))
        c = int(rng.integers(c0, c1))
        if all((r - a) ** 2 + (c - b) ** 2 >= sep2 for a, b in centers):
            centers.append((r, c))

    rr, cc = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    out = img.copy()
    s2 = 2 * spec.spot_sigma ** 2
    reach = int(math.ceil(5 * spec.spot_sigma))
    for r, c in centers:
        sl = (slice(max(r - reach, 0), r + reach + 1), slice(max(c - reach, 0), c + reach + 1))
        d2 = (rr[sl] - r) ** 2 + (cc[sl] - c) ** 2
        out[sl] += spec.spot_amplitude * np.exp(-d2 / s2)
    xy = [(c, r) for r, c in centers]
    return np.clip(out, 0.0, 1.0), AnnotationSet(frame, xy)


def add_noise(img, noise_sigma, seed):
    """Add i.i.d. zero-mean Gaussian noise and clamp to [0, 1].

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if noise_sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    img = np.asarray(img, dtype=np.float64)
    if noise_sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, noise_sigma, size=img.shape), 0.0, 1.0)


def frame_name(index):
    return f"frame_{index:03d}"


def make_frame(spec, frame_index, atoms=None):
    """Background + spots + noise for one frame; returns (image, annotations)."""
    name = frame_name(frame_index)
    bg = make_background(spec, frame_index, atoms)
    img, ann = implant_spots(bg, spec, frame_index, name)
    return add_noise(img, spec.noise_sigma, [spec.seed, _NOISE, frame_index]), ann


def manifest_text(spec):
    lines = [f"{k}={v}" for k, v in asdict(spec).items()]
    return "\n".join(["format=spotlier-synth-1"] + lines) + "\n"


def generate_dataset(spec, out_dir):
    """Write frame PGMs, ``truth.csv`` and ``manifest.txt``; return the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    atoms = planted_atoms(spec) if spec.background_atoms and spec.background_sparsity else None
    truths = []
    for i in range(spec.first_frame, spec.first_frame + spec.frames):
        img, ann = make_frame(spec, i, atoms)
        save_image(img, os.path.join(out_dir, frame_name(i) + ".pgm"))
        truths.append(ann)
    write_annotations(os.path.join(out_dir, "truth.csv"), truths)
    text = manifest_text(spec)
    atomic_write(os.path.join(out_dir, "manifest.txt"), text.encode())
    return dict(line.split("=", 1) for line in text.splitlines())
