"""Axis-aligned boxes, sup-norm Hausdorff distance, and translational eps-copies.

Every metric quantity in this package uses the sup-norm (Chebyshev) metric.
Euclidean variants are deliberately not offered, so results cannot silently mix
metrics. Compact sets are finite point clouds stored as (n, d) float arrays.

Box conventions: a box is the closed product of intervals [lo_i, hi_i] with
hi_i > lo_i. Its surface area is 2 * vol * sum(1/side_i), which reduces to the
usual surface area in d >= 2 and to the value 2 for an interval in d = 1 (its
two endpoints).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInputError


def as_cloud(points) -> np.ndarray:
    """Validate and normalize a finite point cloud to an (n, d) float array.

    Accepts flat sequences for d = 1. Rejects empty input, non-finite entries
    and exact duplicate points.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError("point cloud must be a nonempty (n, d) array")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("point cloud contains non-finite coordinates")
    if np.unique(arr, axis=0).shape[0] != arr.shape[0]:
        raise InvalidInputError("point cloud contains duplicate points")
    return arr


class Box:
    """Closed axis-aligned box with positive side lengths."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.ndim != 1 or hi.shape != lo.shape or lo.size == 0:
            raise InvalidInputError("box corners must be vectors of equal dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidInputError("box corners must be finite")
        if not np.all(hi > lo):
            raise InvalidInputError(
                f"degenerate box: need hi > lo in every coordinate, "
                f"got lo={lo.tolist()} hi={hi.tolist()}"
            )
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def vol(self) -> float:
        return float(np.prod(self.sides))

    @property
    def area(self) -> float:
        # 2 * vol * sum(1/side) == classical surface area; equals 2 when d == 1.
        return float(2.0 * self.vol * np.sum(1.0 / self.sides))

    @property
    def width(self) -> float:
        """Minimal side length."""
        return float(self.sides.min())

    @property
    def middle(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def translate(self, v) -> "Box":
        v = np.asarray(v, dtype=float)
        return Box(self.lo + v, self.hi + v)

    def contains_points(self, points) -> np.ndarray:
        """Boolean mask of points inside the closed box."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return np.logical_and(pts >= self.lo, pts <= self.hi).all(axis=1)

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Box)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self) -> str:
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Box":
        return cls(doc["lo"], doc["hi"])


def box_metrics(box: Box) -> tuple[float, float, float, np.ndarray]:
    """(volume, surface area, minimal width, middle point) of a box."""
    return box.vol, box.area, box.width, box.middle


def save_box(box: Box, path) -> None:
    Path(path).write_text(json.dumps(box.to_json(), sort_keys=True) + "\n")


def load_box(path) -> Box:
    return Box.from_json(json.loads(Path(path).read_text()))


def save_cloud(points, path) -> None:
    """Write a point cloud as headerless CSV, one point per row, d columns.

    Floats are written with shortest round-trip repr so a save/load cycle is
    bit-exact.
    """
    pts = as_cloud(points)
    lines = "\n".join(",".join(repr(float(v)) for v in row) for row in pts)
    Path(path).write_text(lines + "\n")


def load_cloud(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return as_cloud(arr)


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    dm = cdist(a, b, "chebyshev")
    return float(max(dm.min(axis=1).max(), dm.min(axis=0).max()))


def hausdorff_distance(k1, k2) -> float:
    """Sup-norm Hausdorff distance between two finite point clouds."""
    a = as_cloud(k1)
    b = as_cloud(k2)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError("dimension mismatch between point clouds")
    return _hausdorff(a, b)


def _grid_offsets(d: int, eps: float) -> np.ndarray:
    """Refinement offsets: the lattice of step eps/4 within sup-radius eps,
    sorted center-out. Scaling the whole grid with eps is what makes the
    search monotone in eps."""
    if eps == 0.0:
        return np.zeros((1, d))
    ticks = (eps / 4.0) * np.arange(-4, 5)
    mesh = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    order = np.argsort(np.abs(mesh).max(axis=1), kind="stable")
    return mesh[order]


def epsilon_copy(k1, k2, eps: float):
    """Search for a translation v with Hausdorff distance D(K1, K2 + v) <= eps.

    Policy: candidate translations match the point of K2 nearest to its own
    centroid against every point of K1; each candidate is refined on a local
    grid of step eps/4 within sup-radius eps. Every returned translation is
    verified by a full Hausdorff evaluation. Returns the translation vector,
    or None when no candidate passes.

    The search is complete down to the grid resolution: success at eps implies
    success at any eps' > eps (the refinement grid scales with eps), but a
    translation that only works strictly between grid points may be missed.
    """
    a = as_cloud(k1)
    b = as_cloud(k2)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError("dimension mismatch between point clouds")
    if eps < 0:
        raise InvalidInputError("eps must be nonnegative")
    d = a.shape[1]
    centroid = b.mean(axis=0)
    anchor = b[int(np.argmin(np.abs(b - centroid).max(axis=1)))]
    cands = a - anchor
    dists = np.array([_hausdorff(a, b + v) for v in cands])
    order = np.argsort(dists, kind="stable")
    offsets = _grid_offsets(d, eps)
    for idx in order:
        base = float(dists[idx])
        if base <= eps:
            return cands[idx].copy()
        if base > 2.0 * eps:
            # Sorted ascending: no remaining candidate can be rescued by a
            # grid shift of sup-norm at most eps.
            break
        v0 = cands[idx]
        for g in offsets:
            shift = float(np.abs(g).max())
            if shift == 0.0 or base - shift > eps:
                continue
            v = v0 + g
            if _hausdorff(a, b + v) <= eps:
                return v
    return None


@dataclass(frozen=True)
class SquarishClass:
    """Boxes whose side lengths all lie in [t, 2t]."""

    t: float

    def __post_init__(self):
        if not (self.t > 0):
            raise InvalidInputError("squarish scale t must be positive")

    def contains(self, box: Box) -> bool:
        s = box.sides
        return bool(np.all(s >= self.t) and np.all(s <= 2.0 * self.t))

    def sample(self, window: Box, rng: np.random.Generator) -> Box:
        """Uniformly sample sides in [t, 2t] and a position inside the window."""
        if np.any(window.sides < 2.0 * self.t):
            raise InvalidInputError(
                f"window sides must be at least 2t={2.0 * self.t} to place squarish boxes"
            )
        sides = rng.uniform(self.t, 2.0 * self.t, size=window.d)
        lo = window.lo + rng.uniform(0.0, 1.0, size=window.d) * (window.sides - sides)
        return Box(lo, lo + sides)
