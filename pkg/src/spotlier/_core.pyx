# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``spotlier._pure``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

NAME = "cython"


def soft_threshold(x, double tau):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double v, a
    with nogil:
        for i in range(n):
            v = src[i]
            a = fabs(v) - tau
            if a <= 0.0:
                dst[i] = 0.0
            elif v > 0.0:
                dst[i] = a
            else:
                dst[i] = -a
    return out


def extract_patches(img, int patch, int stride, int rows, int cols):
    # Fortran order keeps every patch column contiguous for the copy loop
    cdef double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    out = np.empty((patch * patch, rows * cols), dtype=np.float64, order="F")
    cdef double[::1, :] dst = out
    cdef int i, j, r, c, col, r0, c0
    with nogil:
        for j in range(cols):
            c0 = j * stride
            for i in range(rows):
                col = j * rows + i
                r0 = i * stride
                for c in range(patch):
                    for r in range(patch):
                        dst[c * patch + r, col] = src[r0 + r, c0 + c]
    return out


def accumulate_patches(values, int patch, int stride, int rows, int cols, int height, int width):
    cdef double[::1, :] src = np.asfortranarray(values, dtype=np.float64)
    sums = np.zeros((height, width), dtype=np.float64)
    counts = np.zeros((height, width), dtype=np.int64)
    cdef double[:, ::1] s = sums
    cdef long long[:, ::1] n = counts
    cdef int i, j, r, c, col, r0, c0
    with nogil:
        for j in range(cols):
            c0 = j * stride
            for i in range(rows):
                col = j * rows + i
                r0 = i * stride
                for c in range(patch):
                    for r in range(patch):
                        s[r0 + r, c0 + c] += src[c * patch + r, col]
                for r in range(patch):
                    for c in range(patch):
                        n[r0 + r, c0 + c] += 1
    return sums, counts


cdef inline int _find(int[::1] parent, int x) nogil:
    cdef int root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline void _union(int[::1] parent, int a, int b) nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def label8(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef int h = m.shape[0], w = m.shape[1]
    labels = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] lab = labels
    parent_arr = np.zeros(h * w + 2, dtype=np.int32)
    cdef int[::1] parent = parent_arr
    cdef int r, c, next_label = 1, cur, nb
    cdef int dr, dc, k
    cdef int offs_r[4]
    cdef int offs_c[4]
    offs_r[:] = [-1, -1, -1, 0]
    offs_c[:] = [-1, 0, 1, -1]
    with nogil:
        for r in range(h):
            for c in range(w):
                if not m[r, c]:
                    continue
                cur = 0
                for k in range(4):
                    dr = r + offs_r[k]
                    dc = c + offs_c[k]
                    if dr < 0 or dc < 0 or dc >= w:
                        continue
                    nb = lab[dr, dc]
                    if nb == 0:
                        continue
                    if cur == 0:
                        cur = nb
                    else:
                        _union(parent, cur, nb)
                if cur == 0:
                    cur = next_label
                    parent[cur] = cur
                    next_label += 1
                lab[r, c] = cur
    # provisional labels were issued in raster order and roots are minimal,
    # so numbering roots in increasing order gives raster order of first pixel
    remap_arr = np.zeros(next_label, dtype=np.int32)
    cdef int[::1] remap = remap_arr
    cdef int count = 0, root
    with nogil:
        for k in range(1, next_label):
            root = _find(parent, k)
            if root == k:
                count += 1
                remap[k] = count
        for k in range(1, next_label):
            remap[k] = remap[_find(parent, k)]
        for r in range(h):
            for c in range(w):
                if lab[r, c]:
                    lab[r, c] = remap[lab[r, c]]
    return labels, count


def component_stats(labels, int n, values):
    cdef int[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef double[:, ::1] val = np.ascontiguousarray(values, dtype=np.float64)
    row_sum = np.zeros(n, dtype=np.float64)
    col_sum = np.zeros(n, dtype=np.float64)
    peak = np.full(n, -np.inf, dtype=np.float64)
    size = np.zeros(n, dtype=np.int64)
    cdef double[::1] rs = row_sum, cs = col_sum, pk = peak
    cdef long long[::1] sz = size
    cdef int h = lab.shape[0], w = lab.shape[1], r, c, k
    with nogil:
        for r in range(h):
            for c in range(w):
                k = lab[r, c] - 1
                if k < 0:
                    continue
                rs[k] += r
                cs[k] += c
                sz[k] += 1
                if val[r, c] > pk[k]:
                    pk[k] = val[r, c]
    if n == 0:
        return row_sum, col_sum, peak, size
    return row_sum / size, col_sum / size, peak, size


def _padded(img, int ry, int rx):
    arr = np.asarray(img, dtype=np.float64)
    return np.ascontiguousarray(np.pad(arr, ((ry, ry), (rx, rx)), mode="symmetric"))


def centered_correlate(img, kernel, double dc_gain):
    cdef double[:, ::1] ker = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef int kh = ker.shape[0], kw = ker.shape[1]
    cdef int ry = kh // 2, rx = kw // 2
    cdef double[:, ::1] src = _padded(img, ry, rx)
    cdef int h = src.shape[0] - 2 * ry, w = src.shape[1] - 2 * rx
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef int r, c, a, b
    cdef double center, acc
    with nogil:
        for r in range(h):
            for c in range(w):
                center = src[r + ry, c + rx]
                acc = 0.0
                for a in range(kh):
                    for b in range(kw):
                        acc = acc + ker[a, b] * (src[r + a, c + b] - center)
                dst[r, c] = dc_gain * center + acc
    return out


cdef _rank(img, footprint, bint take_max):
    fp_arr = np.asarray(footprint, dtype=bool)
    cdef int ry = fp_arr.shape[0] // 2, rx = fp_arr.shape[1] // 2
    dy_arr, dx_arr = np.nonzero(fp_arr)
    cdef int[::1] dy = dy_arr.astype(np.int32)
    cdef int[::1] dx = dx_arr.astype(np.int32)
    cdef int m = dy.shape[0]
    # negate so both cases become a running max
    cdef double sign = 1.0 if take_max else -1.0
    cdef double[:, ::1] src = _padded(sign * np.asarray(img, dtype=np.float64), ry, rx)
    cdef int h = src.shape[0] - 2 * ry, w = src.shape[1] - 2 * rx
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef int r, c, k
    cdef double best, v
    with nogil:
        for r in range(h):
            for c in range(w):
                best = -INFINITY
                for k in range(m):
                    v = src[r + dy[k], c + dx[k]]
                    if v > best:
                        best = v
                dst[r, c] = sign * best
    return out


def grey_erode(img, footprint):
    return _rank(img, footprint, False)


def grey_dilate(img, footprint):
    return _rank(img, footprint, True)
