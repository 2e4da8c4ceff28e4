"""Pure NumPy implementations of the hot kernels.

Every function here has a twin with the same signature and output in the
compiled ``_core`` module. Outputs must agree bit-for-bit on integer
results and to rounding on floating-point ones; ``tests/test_kernels.py``
checks both backends against each other and against SciPy.
"""
import numpy as np

NAME = "python"


def soft_threshold(x, tau):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def extract_patches(img, patch, stride, rows, cols):
    img = np.ascontiguousarray(img, dtype=np.float64)
    windows = np.lib.stride_tricks.sliding_window_view(img, (patch, patch))
    windows = windows[: (rows - 1) * stride + 1 : stride, : (cols - 1) * stride + 1 : stride]
    # (rows, cols, pr, pc) -> column index j*rows + i, within-patch index c*patch + r
    out = windows.transpose(3, 2, 1, 0).reshape(patch * patch, cols * rows)
    return np.ascontiguousarray(out)


def accumulate_patches(values, patch, stride, rows, cols, height, width):
    values = np.asarray(values, dtype=np.float64)
    sums = np.zeros((height, width))
    counts = np.zeros((height, width), dtype=np.int64)
    blocks = values.reshape(patch, patch, cols, rows)  # (c, r, j, i)
    for j in range(cols):
        c0 = j * stride
        for i in range(rows):
            r0 = i * stride
            sums[r0 : r0 + patch, c0 : c0 + patch] += blocks[:, :, j, i].T
            counts[r0 : r0 + patch, c0 : c0 + patch] += 1
    return sums, counts


def label8(mask):
    """8-connected labels numbered by raster order of each component's first pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    flat = np.flatnonzero(mask)
    n_fg = flat.size
    if n_fg == 0:
        return labels, 0

    index = np.full(h * w, -1, dtype=np.int64)
    index[flat] = np.arange(n_fg)
    rr, cc = np.divmod(flat, w)

    us, vs = [], []
    # forward half of the 8-neighbourhood; the other half is symmetric
    for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
        r2, c2 = rr + dr, cc + dc
        ok = (r2 < h) & (c2 >= 0) & (c2 < w)
        nb = np.full(n_fg, -1, dtype=np.int64)
        nb[ok] = index[r2[ok] * w + c2[ok]]
        hit = nb >= 0
        us.append(np.nonzero(hit)[0])
        vs.append(nb[hit])
    u = np.concatenate(us)
    v = np.concatenate(vs)

    # min-label hooking with pointer jumping
    parent = np.arange(n_fg)
    while True:
        pu, pv = parent[u], parent[v]
        if np.array_equal(pu, pv):
            break
        low = np.minimum(pu, pv)
        np.minimum.at(parent, pu, low)
        np.minimum.at(parent, pv, low)
        while True:
            jumped = parent[parent]
            if np.array_equal(jumped, parent):
                break
            parent = jumped

    roots, compact = np.unique(parent, return_inverse=True)
    labels.ravel()[flat] = compact.astype(np.int32) + 1
    return labels, int(roots.size)


def component_stats(labels, n, values):
    """Return (row_mean, col_mean, max_value, size) per label 1..n."""
    labels = np.asarray(labels)
    values = np.asarray(values, dtype=np.float64)
    if n == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy(), np.zeros(0, dtype=np.int64)
    h, w = labels.shape
    flat = labels.ravel()
    fg = flat > 0
    lab = flat[fg] - 1
    rr, cc = np.divmod(np.flatnonzero(fg), w)
    size = np.bincount(lab, minlength=n)
    row_mean = np.bincount(lab, weights=rr, minlength=n) / size
    col_mean = np.bincount(lab, weights=cc, minlength=n) / size
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, lab, values.ravel()[fg])
    return row_mean, col_mean, peak, size.astype(np.int64)


def _pad(img, radius):
    return np.pad(img, radius, mode="symmetric")


def centered_correlate(img, kernel, dc_gain):
    """dc_gain*img + sum_k kernel[k] * (img shifted by k - img).

    Equal to plain correlation when ``dc_gain == kernel.sum()``; written in
    this form so constant regions give exactly ``dc_gain * value``.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    h, w = img.shape
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="symmetric")
    acc = np.zeros_like(img)
    for a in range(kh):
        for b in range(kw):
            acc += kernel[a, b] * (padded[a : a + h, b : b + w] - img)
    return dc_gain * img + acc


def _rank(img, footprint, reduce):
    img = np.asarray(img, dtype=np.float64)
    footprint = np.asarray(footprint, dtype=bool)
    kh, kw = footprint.shape
    ry, rx = kh // 2, kw // 2
    h, w = img.shape
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="symmetric")
    out = None
    for a in range(kh):
        for b in range(kw):
            if not footprint[a, b]:
                continue
            view = padded[a : a + h, b : b + w]
            out = view.copy() if out is None else reduce(out, view)
    return out


def grey_erode(img, footprint):
    return _rank(img, footprint, np.minimum)


def grey_dilate(img, footprint):
    return _rank(img, footprint, np.maximum)
