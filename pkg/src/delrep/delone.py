"""Finite windows of Delone sets: spatial index, generators, patches, counting.

A PointSet is the truncation of an ideal infinite point set to a closed box
window. Counting against closed boxes uses a uniform-grid index with a
summed-area table over per-cell counts, so interior cells are tallied in
O(2^d) and only boundary-straddling cells are filtered point by point; the
result is exactly the naive linear-scan count. Unit lattice cubes are counted
half-open via floored coordinates. Operations that could be biased by the
window boundary carry an explicit flag.
"""
from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .dyadic import CubeUnion, DyadicCube
from .errors import InvalidInputError, OutOfWindowError
from .geometry import Box, as_cloud, load_cloud, save_cloud

# Interior-cell classification margin, in units of cell_size. Cells within
# the margin of a query face fall back to exact per-point filtering, so the
# margin only needs to dominate float error in the point -> cell map.
_MARGIN = 1e-6


@dataclass(frozen=True)
class Patch:
    """The intersection of a point set with a closed sup-norm ball."""

    center: np.ndarray
    radius: float
    points: np.ndarray
    truncated: bool

    @property
    def size(self) -> int:
        return self.points.shape[0]


class PointSet:
    """Immutable indexed point set, fully known inside a closed box window."""

    def __init__(self, points, window: Box, cell_size: float | None = None,
                 meta: dict | None = None):
        pts = as_cloud(points)
        if pts.shape[1] != window.d:
            raise InvalidInputError("points and window have different dimensions")
        inside = np.logical_and(pts >= window.lo, pts <= window.hi).all(axis=1)
        if not inside.all():
            raise InvalidInputError(
                f"{int((~inside).sum())} point(s) lie outside the window"
            )
        if cell_size is None:
            # Rough covering-radius proxy: mean spacing, floored at 1.
            cell_size = max(1.0, (window.vol / pts.shape[0]) ** (1.0 / window.d))
        if not cell_size > 0:
            raise InvalidInputError("cell_size must be positive")
        self.points = pts
        self.points.setflags(write=False)
        self.window = window
        self.cell_size = float(cell_size)
        self.meta = dict(meta) if meta else {}
        self._build_index()
        self._unit_counts: Counter | None = None

    # -- index internals ----------------------------------------------------

    def _build_index(self) -> None:
        cs = self.cell_size
        lo = self.window.lo
        self._ncells = np.maximum(
            1, np.ceil(self.window.sides / cs - 1e-12).astype(np.int64)
        )
        cells = np.floor((self.points - lo) / cs).astype(np.int64)
        cells = np.clip(cells, 0, self._ncells - 1)
        linear = np.ravel_multi_index(cells.T, self._ncells)
        self._order = np.argsort(linear, kind="stable")
        sorted_lin = linear[self._order]
        nlin = int(np.prod(self._ncells))
        self._starts = np.searchsorted(sorted_lin, np.arange(nlin + 1))
        counts = np.bincount(linear, minlength=nlin).reshape(self._ncells)
        sat = counts.astype(np.int64)
        for ax in range(self.d):
            sat = np.cumsum(sat, axis=ax)
        self._sat = np.pad(sat, [(1, 0)] * self.d)

    def _block_sum(self, ilo: np.ndarray, ihi: np.ndarray) -> int:
        """Total points in cells with multi-index in the half-open [ilo, ihi)."""
        if (ihi <= ilo).any():
            return 0
        total = 0
        for bits in itertools.product((0, 1), repeat=self.d):
            idx = tuple(ihi[i] if b else ilo[i] for i, b in enumerate(bits))
            total += (1 if (self.d - sum(bits)) % 2 == 0 else -1) * int(self._sat[idx])
        return total

    def _take_cells(self, cell_rows: np.ndarray) -> np.ndarray:
        """Point indices stored in the given cells (rows of multi-indices)."""
        if cell_rows.size == 0:
            return np.empty(0, dtype=np.int64)
        lin = np.ravel_multi_index(cell_rows.T, self._ncells)
        s = self._starts[lin]
        lens = self._starts[lin + 1] - s
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        cum = np.concatenate(([0], np.cumsum(lens)[:-1]))
        offsets = np.arange(total) - np.repeat(cum, lens) + np.repeat(s, lens)
        return self._order[offsets]

    def _boundary_cells(self, lo_idx, hi_idx, ilo, ihi) -> np.ndarray:
        """Cells of [lo_idx, hi_idx) outside the interior block, disjointly."""
        d = self.d
        slabs = []
        for ax in range(d):
            ranges_before = [np.arange(ilo[i], ihi[i]) for i in range(ax)]
            ranges_after = [np.arange(lo_idx[i], hi_idx[i]) for i in range(ax + 1, d)]
            for a0, a1 in ((lo_idx[ax], ilo[ax]), (ihi[ax], hi_idx[ax])):
                if a0 >= a1:
                    continue
                axes = ranges_before + [np.arange(a0, a1)] + ranges_after
                if any(r.size == 0 for r in axes):
                    continue
                mesh = np.meshgrid(*axes, indexing="ij")
                slabs.append(np.stack([m.ravel() for m in mesh], axis=1))
        if not slabs:
            return np.empty((0, d), dtype=np.int64)
        return np.concatenate(slabs, axis=0)

    def _range_indices(self, lo, hi, closed_hi: bool) -> np.ndarray:
        """Indices of points with lo <= p <= hi (or < hi), exactly."""
        cs = self.cell_size
        wlo = self.window.lo
        lo_idx = np.clip(np.floor((lo - wlo) / cs).astype(np.int64), 0, self._ncells - 1)
        hi_idx = np.clip(np.floor((hi - wlo) / cs).astype(np.int64), 0, self._ncells - 1) + 1
        # Interior cells are provably inside the query; extreme cells per axis
        # are excluded because clipping may park stray coordinates there.
        ilo = np.maximum(lo_idx, np.maximum(1, np.ceil((lo - wlo) / cs + _MARGIN).astype(np.int64)))
        ihi = np.minimum(hi_idx, np.minimum(self._ncells - 1, np.floor((hi - wlo) / cs - _MARGIN).astype(np.int64)))
        ihi = np.maximum(ihi, ilo)
        shell = self._boundary_cells(lo_idx, hi_idx, ilo, ihi)
        cand = self._take_cells(shell)
        pts = self.points[cand]
        ok = (pts >= lo).all(axis=1)
        ok &= (pts < hi).all(axis=1) if not closed_hi else (pts <= hi).all(axis=1)
        inner = []
        if (ihi > ilo).all():
            mesh = np.meshgrid(*[np.arange(a, b) for a, b in zip(ilo, ihi)], indexing="ij")
            inner_cells = np.stack([m.ravel() for m in mesh], axis=1)
            inner = self._take_cells(inner_cells)
        return np.sort(np.concatenate([np.asarray(inner, dtype=np.int64), cand[ok]]))

    def _range_count(self, lo, hi, closed_hi: bool) -> int:
        cs = self.cell_size
        wlo = self.window.lo
        lo_idx = np.clip(np.floor((lo - wlo) / cs).astype(np.int64), 0, self._ncells - 1)
        hi_idx = np.clip(np.floor((hi - wlo) / cs).astype(np.int64), 0, self._ncells - 1) + 1
        ilo = np.maximum(lo_idx, np.maximum(1, np.ceil((lo - wlo) / cs + _MARGIN).astype(np.int64)))
        ihi = np.minimum(hi_idx, np.minimum(self._ncells - 1, np.floor((hi - wlo) / cs - _MARGIN).astype(np.int64)))
        ihi = np.maximum(ihi, ilo)
        shell = self._boundary_cells(lo_idx, hi_idx, ilo, ihi)
        cand = self._take_cells(shell)
        pts = self.points[cand]
        ok = (pts >= lo).all(axis=1)
        ok &= (pts < hi).all(axis=1) if not closed_hi else (pts <= hi).all(axis=1)
        return self._block_sum(ilo, ihi) + int(ok.sum())

    # -- public queries -----------------------------------------------------

    @property
    def d(self) -> int:
        return self.window.d

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def indices_in(self, box: Box) -> np.ndarray:
        """Indices of points inside the closed box, ascending."""
        return self._range_indices(box.lo, box.hi, closed_hi=True)

    def count(self, region) -> int:
        """Exact number of points in the region.

        Boxes are counted closed; DyadicCube and CubeUnion regions use the
        half-open unit-cell convention. The region must lie inside the window
        (never silently truncates).
        """
        if isinstance(region, Box):
            if not self.window.contains_box(region):
                raise OutOfWindowError("closed box exceeds the point-set window")
            return self._range_count(region.lo, region.hi, closed_hi=True)
        if isinstance(region, DyadicCube):
            lo = np.array(region.corner, dtype=float)
            hi = lo + region.side
            if (lo < self.window.lo).any() or (hi > self.window.hi).any():
                raise OutOfWindowError("dyadic cube exceeds the point-set window")
            return self._range_count(lo, hi, closed_hi=False)
        if isinstance(region, CubeUnion):
            lo, hi = region.bbox()
            if (lo < self.window.lo).any() or (hi > self.window.hi).any():
                raise OutOfWindowError("cube union exceeds the point-set window")
            if self._unit_counts is None:
                floored = np.floor(self.points).astype(np.int64)
                self._unit_counts = Counter(map(tuple, floored))
            return sum(self._unit_counts.get(c, 0) for c in region.cells)
        raise InvalidInputError(f"cannot count region of type {type(region).__name__}")

    def patch(self, x, t: float) -> Patch:
        """Points within closed sup-norm distance t of x, truncation-flagged."""
        if not t > 0:
            raise InvalidInputError("patch radius must be positive")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.d:
            raise InvalidInputError("patch center has wrong dimension")
        lo, hi = x - t, x + t
        idx = self._range_indices(np.maximum(lo, self.window.lo),
                                  np.minimum(hi, self.window.hi), closed_hi=True)
        pts = self.points[idx]
        order = np.lexsort(pts.T[::-1])
        truncated = not ((lo >= self.window.lo).all() and (hi <= self.window.hi).all())
        return Patch(center=x, radius=float(t), points=pts[order], truncated=truncated)

    def packing_radius(self) -> float:
        """Minimum pairwise sup-norm distance."""
        if self.size < 2:
            raise InvalidInputError("packing radius needs at least 2 points")
        tree = cKDTree(self.points)
        dist, _ = tree.query(self.points, k=2, p=np.inf)
        return float(dist[:, 1].min())

    def radii(self) -> tuple[float, float, bool]:
        """(packing radius r, covering radius R, boundary-bias flag).

        R is the max over a probe grid of step <= r/4 of the sup distance to
        the nearest point. Probes closer to the window boundary than to their
        nearest point are untrustworthy (the ideal infinite set may have a
        nearer point outside the window); they are excluded, and the flag is
        set when such a probe beats the reported R or the window is not
        strictly wider than 2R per axis.
        """
        r = self.packing_radius()
        step = r / 4.0
        axes = [
            np.linspace(self.window.lo[i], self.window.hi[i],
                        int(np.ceil(self.window.sides[i] / step)) + 1)
            for i in range(self.d)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        probes = np.stack([m.ravel() for m in mesh], axis=1)
        tree = cKDTree(self.points)
        dist, _ = tree.query(probes, k=1, p=np.inf)
        bdist = np.minimum(probes - self.window.lo, self.window.hi - probes).min(axis=1)
        trusted = bdist >= dist
        if trusted.any():
            R = float(dist[trusted].max())
            biased = bool((dist[~trusted] > R).any()) if (~trusted).any() else False
        else:
            R = float(dist.max())
            biased = True
        if not (self.window.sides > 2 * R).all():
            biased = True
        return r, R, biased

    def __repr__(self) -> str:
        return f"PointSet(d={self.d}, n={self.size})"


def build_pointset(points, window: Box, cell_size: float | None = None,
                   meta: dict | None = None) -> PointSet:
    """Validate and index a point list over a window."""
    return PointSet(points, window, cell_size=cell_size, meta=meta)


def gen_lattice(d: int, spacing: float, window: Box) -> PointSet:
    """All integer multiples of ``spacing`` inside the closed window."""
    if not spacing > 0:
        raise InvalidInputError("spacing must be positive")
    if window.d != d:
        raise InvalidInputError("window dimension does not match d")
    axes = []
    for i in range(d):
        k0 = int(np.ceil(window.lo[i] / spacing - 1e-9))
        k1 = int(np.floor(window.hi[i] / spacing + 1e-9))
        if k1 < k0:
            raise InvalidInputError("window contains no lattice point on some axis")
        axes.append(np.arange(k0, k1 + 1) * spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    meta = {"kind": "lattice", "d": d, "spacing": spacing}
    return PointSet(pts, window, meta=meta)


def gen_perturbed(d: int, spacing: float, window: Box, bound: float,
                  seed: int) -> PointSet:
    """Lattice with i.i.d. uniform per-coordinate jitter in [-bound, bound].

    Requires 0 <= bound < spacing/2 so uniform discreteness survives. The
    base lattice is drawn from the window enlarged by ``bound`` so points can
    jitter into the window from outside; the result is window-filtered.
    """
    if not spacing > 0:
        raise InvalidInputError("spacing must be positive")
    if not (0 <= bound < spacing / 2):
        raise InvalidInputError("bound must satisfy 0 <= bound < spacing/2")
    if window.d != d:
        raise InvalidInputError("window dimension does not match d")
    axes = []
    for i in range(d):
        k0 = int(np.ceil((window.lo[i] - bound) / spacing - 1e-9))
        k1 = int(np.floor((window.hi[i] + bound) / spacing + 1e-9))
        axes.append(np.arange(k0, k1 + 1) * spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    base = np.stack([m.ravel() for m in mesh], axis=1)
    rng = np.random.default_rng(seed)
    pts = base + rng.uniform(-bound, bound, size=base.shape) if bound > 0 else base
    keep = np.logical_and(pts >= window.lo, pts <= window.hi).all(axis=1)
    meta = {"kind": "perturbed", "d": d, "spacing": spacing, "bound": bound,
            "seed": seed}
    return PointSet(pts[keep], window, meta=meta)


def save_pointset(P: PointSet, path) -> None:
    """Write the cloud CSV plus a <path>.meta.json sidecar with provenance."""
    path = Path(path)
    save_cloud(P.points, path)
    sidecar = {
        "window": P.window.to_json(),
        "cell_size": P.cell_size,
        "meta": P.meta,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n"
    )


def load_pointset(path, window: Box | None = None) -> PointSet:
    """Read a cloud CSV; window comes from the sidecar unless given."""
    path = Path(path)
    pts = load_cloud(path)
    sidecar_path = Path(str(path) + ".meta.json")
    cell_size = None
    meta = {}
    if sidecar_path.exists():
        doc = json.loads(sidecar_path.read_text())
        if window is None:
            window = Box.from_json(doc["window"])
        cell_size = doc.get("cell_size")
        meta = doc.get("meta", {})
    if window is None:
        raise InvalidInputError("no window given and no sidecar found")
    return PointSet(pts, window, cell_size=cell_size, meta=meta)
