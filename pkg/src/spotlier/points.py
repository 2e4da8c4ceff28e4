"""Point sets (annotations and detections) and their CSV files.

Coordinates are 0-based pixel positions with ``x`` = column and ``y`` = row.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from spotlier.imaging import atomic_write


def _as_xy(points):
    return np.asarray(points, dtype=np.float64).reshape(-1, 2)


@dataclass
class AnnotationSet:
    frame: str
    xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.xy = _as_xy(self.xy)

    def __len__(self):
        return len(self.xy)

    def check_bounds(self, height, width):
        for idx, (x, y) in enumerate(self.xy):
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(
                    f"frame {self.frame}: annotation {idx} at (x={x}, y={y}) "
                    f"outside {width}x{height}")


@dataclass
class DetectionSet:
    frame: str
    xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.xy = _as_xy(self.xy)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if len(self.scores) != len(self.xy):
            raise ValueError("one score per detection required")

    def __len__(self):
        return len(self.xy)

    def above(self, level):
        keep = self.scores > level
        return DetectionSet(self.frame, self.xy[keep], self.scores[keep])


def _render(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return repr(float(v))


def write_annotations(path, sets):
    rows = [(s.frame, _fmt(x), _fmt(y)) for s in sets for x, y in s.xy]
    atomic_write(path, _render(["frame", "x", "y"], rows).encode())


def write_detections(path, sets):
    rows = [(s.frame, _fmt(x), _fmt(y), _fmt(sc))
            for s in sets for (x, y), sc in zip(s.xy, s.scores)]
    atomic_write(path, _render(["frame", "x", "y", "score"], rows).encode())


def _read_rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def read_annotations(path, frames=None):
    """Read ``frame,x,y`` rows grouped by frame.

    ``frames`` lists frame ids that must appear in the result even when
    they have no rows (e.g. frames without any spots).
    """
    grouped = {f: [] for f in (frames or [])}
    for row in _read_rows(path, ("frame", "x", "y")):
        grouped.setdefault(row["frame"], []).append((float(row["x"]), float(row["y"])))
    return {f: AnnotationSet(f, pts) for f, pts in grouped.items()}


def read_detections(path, frames=None):
    grouped = {f: ([], []) for f in (frames or [])}
    for row in _read_rows(path, ("frame", "x", "y", "score")):
        pts, sc = grouped.setdefault(row["frame"], ([], []))
        pts.append((float(row["x"]), float(row["y"])))
        sc.append(float(row["score"]))
    return {f: DetectionSet(f, pts, sc) for f, (pts, sc) in grouped.items()}
