"""Matching detections to point annotations, PR curves, AUC, count correlation."""
from dataclasses import dataclass, field

import numpy as np

from spotlier.detection import threshold_and_group
from spotlier.imaging import atomic_write

MODES = ("paper-literal", "one-to-one")


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other):
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass
class PrCurve:
    points: list  # (threshold, precision, recall), thresholds increasing
    auc: float
    confusions: list = field(default_factory=list)  # Confusion per threshold


def _distances(dets, truth):
    a = np.asarray(dets.xy, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(truth.xy, dtype=np.float64).reshape(-1, 2)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))


def match_detections(dets, truth, radius=10.0, mode="paper-literal"):
    """Count TP/FP/FN for one frame.

    ``paper-literal``: a detection within ``radius`` of any annotation is a
    TP, otherwise an FP; an annotation with no detection in range is an FN.
    Several detections may hit the same annotation.

    ``one-to-one``: greedy matching by ascending distance (ties by
    detection index, then annotation index), each point used at most once.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n_det, n_true = len(dets), len(truth)
    if n_det == 0 or n_true == 0:
        return Confusion(0, n_det, n_true)
    dist = _distances(dets, truth)
    close = dist <= radius
    if mode == "paper-literal":
        tp = int(close.any(axis=1).sum())
        return Confusion(tp, n_det - tp, int((~close.any(axis=0)).sum()))
    if mode != "one-to-one":
        raise ValueError(f"unknown matching mode {mode!r}")
    di, ti = np.nonzero(close)
    order = np.lexsort((ti, di, dist[di, ti]))
    used_d = np.zeros(n_det, dtype=bool)
    used_t = np.zeros(n_true, dtype=bool)
    tp = 0
    for k in order:
        a, b = di[k], ti[k]
        if not used_d[a] and not used_t[b]:
            used_d[a] = used_t[b] = True
            tp += 1
    return Confusion(tp, n_det - tp, n_true - tp)


def precision_recall(c):
    """Precision and recall; an empty denominator counts as 1."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 1.0
    return precision, recall


def auc(precision, recall):
    """Trapezoidal area under precision-vs-recall over the observed recall range.

    Points are ordered by recall, ties by decreasing precision. A curve
    with a single recall value has no width; it is scored as
    ``recall * max(precision)``, so a perfect detector scores 1 and a
    silent one 0.
    """
    p = np.asarray(precision, dtype=np.float64)
    r = np.asarray(recall, dtype=np.float64)
    if p.size == 0:
        return 0.0
    order = np.lexsort((-p, r))
    p, r = p[order], r[order]
    if r[-1] == r[0]:
        return float(r[0] * p.max())
    return float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2))


def default_thresholds():
    return np.round(np.linspace(0.0, 1.0, 101), 10)


def _check_thresholds(thresholds):
    t = np.asarray(thresholds, dtype=np.float64)
    if t.size == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("thresholds must be non-empty and strictly increasing")
    if t[0] < 0 or t[-1] > 1:
        raise ValueError("thresholds must lie in [0, 1]")
    return t


def _curve(thresholds, confusions):
    points = []
    for t, c in zip(thresholds, confusions):
        p, r = precision_recall(c)
        points.append((float(t), p, r))
    area = auc([p for _, p, _ in points], [r for _, _, r in points])
    return PrCurve(points, area, confusions)


def pr_curve(outlier_images, truths, radius=10.0, thresholds=None, mode="paper-literal"):
    """Micro-averaged PR curve from per-frame normalized response images.

    Each threshold re-runs grouping on every frame and sums TP/FP/FN over
    frames before computing one (precision, recall) point.
    """
    if len(outlier_images) != len(truths):
        raise ValueError(f"{len(outlier_images)} frames of output but {len(truths)} of truth")
    t = _check_thresholds(default_thresholds() if thresholds is None else thresholds)
    confusions = []
    for level in t:
        total = Confusion()
        for img, truth in zip(outlier_images, truths):
            values = getattr(img, "values", img)
            total += match_detections(threshold_and_group(values, level), truth, radius, mode)
        confusions.append(total)
    return _curve(t, confusions)


def pr_curve_from_detections(detections, truths, radius=10.0, thresholds=None,
                             mode="paper-literal"):
    """PR curve from scored detections, keeping those with score > threshold."""
    if len(detections) != len(truths):
        raise ValueError(f"{len(detections)} frames of detections but {len(truths)} of truth")
    t = _check_thresholds(default_thresholds() if thresholds is None else thresholds)
    confusions = []
    for level in t:
        total = Confusion()
        for dets, truth in zip(detections, truths):
            total += match_detections(dets.above(level), truth, radius, mode)
        confusions.append(total)
    return _curve(t, confusions)


def best_f1(curve):
    """Threshold with the highest F1 score on a curve (lowest threshold on ties).

    Returns ``(threshold, f1)``.
    """
    best_t, best = None, -1.0
    for t, p, r in curve.points:
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        if f1 > best:
            best_t, best = t, f1
    return best_t, best


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("count lists must be 1-D and of equal length")
    if a.size < 2:
        raise ValueError("need at least two frames for a correlation")
    da, db = a - a.mean(), b - b.mean()
    va, vb = np.dot(da, da), np.dot(db, db)
    if va == 0 or vb == 0:
        raise ValueError("correlation undefined: a count list has zero variance")
    return float(np.clip(np.dot(da, db) / np.sqrt(va * vb), -1.0, 1.0))


def write_pr_csv(path, curve):
    lines = ["threshold,tp,fp,fn,precision,recall"]
    for (t, p, r), c in zip(curve.points, curve.confusions):
        lines.append(f"{t!r},{c.tp},{c.fp},{c.fn},{p!r},{r!r}")
    lines.append(f"auc,{curve.auc!r}")
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_pr_csv(path):
    """Return (rows, auc) where rows are (threshold, tp, fp, fn, precision, recall)."""
    rows, area = [], None
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "threshold,tp,fp,fn,precision,recall":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if parts[0] == "auc":
                area = float(parts[1])
            elif parts != [""]:
                t, tp, fp, fn, p, r = parts
                rows.append((float(t), int(tp), int(fp), int(fn), float(p), float(r)))
    return rows, area


def write_counts_csv(path, frames, truth_counts, algo_counts):
    lines = ["frame,count_truth,count_algo"]
    lines += [f"{f},{int(a)},{int(b)}" for f, a, b in zip(frames, truth_counts, algo_counts)]
    atomic_write(path, ("\n".join(lines) + "\n").encode())
