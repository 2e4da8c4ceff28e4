"""PGM image I/O and the overlapping-patch geometry.

Images are 2-D ``float64`` arrays with intensities in ``[0, 1]``, indexed
``img[row, col]``.

A patch grid places ``rows x cols`` square windows of side ``patch_size``
at top-left offsets ``(i * stride, j * stride)``. Patch ``(i, j)`` is
column ``j * rows + i`` of the patch matrix, and inside a column the
patch is vectorized column-major (row index varies fastest). No extra
patches are added flush to the right/bottom border, so a margin of up to
``stride - 1`` pixels may be left uncovered.
"""
import math
import os
from dataclasses import dataclass

import numpy as np

from spotlier import kernels


class PGMError(ValueError):
    """Malformed or unsupported PGM file."""


class UnsupportedFormatError(PGMError):
    pass


class PGMHeaderError(PGMError):
    pass


class TruncatedPayloadError(PGMError):
    pass


def _read_token(data, pos):
    """Return (token, next_pos, token_start), skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        ch = data[pos]
        if ch == ord("#"):
            while pos < n and data[pos] not in (10, 13):
                pos += 1
        elif chr(ch).isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not chr(data[pos]).isspace() and data[pos] != ord("#"):
        pos += 1
    return data[start:pos], pos, start


def load_image(path):
    """Read a P5 (binary) or P2 (ASCII) PGM and scale intensities to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()

    magic, pos, _ = _read_token(data, 0)
    if magic not in (b"P5", b"P2"):
        raise UnsupportedFormatError(
            f"{path}: unsupported magic number {magic.decode('latin-1')!r} at byte 0 "
            "(expected P5 or P2)")

    fields = {}
    for name in ("width", "height", "maxval"):
        tok, pos, start = _read_token(data, pos)
        if not tok:
            raise PGMHeaderError(f"{path}: missing {name} field at byte {start}")
        try:
            value = int(tok)
        except ValueError:
            raise PGMHeaderError(
                f"{path}: bad {name} field {tok.decode('latin-1')!r} at byte {start}") from None
        if value <= 0:
            raise PGMHeaderError(f"{path}: {name} must be positive, got {value} at byte {start}")
        fields[name] = value
    width, height, maxval = fields["width"], fields["height"], fields["maxval"]
    if maxval > 65535:
        raise PGMHeaderError(f"{path}: maxval {maxval} exceeds 65535")

    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(data) - pos < need:
            raise TruncatedPayloadError(
                f"{path}: pixel payload truncated at byte {len(data)}; "
                f"expected {need} bytes from byte {pos}")
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    else:
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise TruncatedPayloadError(
                f"{path}: pixel payload truncated at byte {len(data)}; "
                f"expected {count} samples, found {len(tokens)}")
        try:
            pixels = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise PGMError(f"{path}: non-integer sample in ASCII payload after byte {pos}") from None
    if pixels.max(initial=0) > maxval:
        raise PGMError(f"{path}: sample value exceeds maxval {maxval}")

    return pixels.reshape(height, width).astype(np.float64) / maxval


def to_bytes(img):
    """Quantize to 8 bits: round half up, clamp to [0, 255]."""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_pgm(img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + to_bytes(img).tobytes()


def atomic_write(path, payload):
    """Write bytes to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(img, path):
    """Write an 8-bit P5 PGM (maxval 255)."""
    atomic_write(path, encode_pgm(img))


def validate_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    stride: int
    rows: int
    cols: int
    image_h: int
    image_w: int

    @property
    def n_patches(self):
        return self.rows * self.cols

    @property
    def n_pixels(self):
        return self.patch_size * self.patch_size

    @property
    def covered_h(self):
        return (self.rows - 1) * self.stride + self.patch_size

    @property
    def covered_w(self):
        return (self.cols - 1) * self.stride + self.patch_size

    def offsets(self):
        """Top-left (row, col) of every patch, in column order."""
        j, i = np.divmod(np.arange(self.n_patches), self.rows)
        return np.stack([i * self.stride, j * self.stride], axis=1)


@dataclass
class PatchMatrix:
    values: np.ndarray  # (P, L)
    grid: PatchGrid

    def __post_init__(self):
        shape = (self.grid.n_pixels, self.grid.n_patches)
        if self.values.shape != shape:
            raise ValueError(f"patch matrix shape {self.values.shape} != grid shape {shape}")

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def l(self):  # noqa: E743
        return self.values.shape[1]


def make_grid(image_h, image_w, patch_size, overlap):
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    if patch_size < 1:
        raise ValueError(f"patch_size must be positive, got {patch_size}")
    if patch_size > min(image_h, image_w):
        raise ValueError(
            f"patch size {patch_size} larger than image {image_h}x{image_w}")
    # round half up: 27 * 0.5 = 13.5 -> 14
    stride = max(1, math.floor(patch_size * (1 - overlap) + 0.5))
    rows = (image_h - patch_size) // stride + 1
    cols = (image_w - patch_size) // stride + 1
    return PatchGrid(patch_size, stride, rows, cols, image_h, image_w)


def extract_patches(img, grid):
    img = validate_image(img)
    if img.shape != (grid.image_h, grid.image_w):
        raise ValueError(
            f"image shape {img.shape} does not match grid ({grid.image_h}, {grid.image_w})")
    values = kernels.extract_patches(img, grid.patch_size, grid.stride, grid.rows, grid.cols)
    return PatchMatrix(values, grid)


def reconstruct_from_patches(pm):
    """Average overlapping patches back into an image.

    Returns ``(image, coverage)`` where ``coverage[r, c]`` counts the
    patches touching each pixel; uncovered pixels are 0.
    """
    g = pm.grid
    sums, coverage = kernels.accumulate_patches(
        pm.values, g.patch_size, g.stride, g.rows, g.cols, g.image_h, g.image_w)
    img = np.zeros_like(sums)
    covered = coverage > 0
    img[covered] = sums[covered] / coverage[covered]
    return img, coverage


def exclude_annotated_patches(grid, points):
    """Keep-mask over patch columns; a patch is dropped if it contains any point.

    ``points`` is an (n, 2) array of ``(x, y)`` = ``(col, row)`` pixel
    coordinates, 0-based.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    for idx, (x, y) in enumerate(pts):
        if not (0 <= x < grid.image_w and 0 <= y < grid.image_h):
            raise ValueError(
                f"annotation {idx} at (x={x}, y={y}) outside image "
                f"{grid.image_w}x{grid.image_h}")
    keep = np.ones(grid.n_patches, dtype=bool)
    if len(pts) == 0:
        return keep
    off = grid.offsets()
    r0 = off[:, 0][:, None]
    c0 = off[:, 1][:, None]
    x = pts[:, 0][None, :]
    y = pts[:, 1][None, :]
    inside = (y >= r0) & (y < r0 + grid.patch_size) & (x >= c0) & (x < c0 + grid.patch_size)
    keep &= ~inside.any(axis=1)
    return keep
