"""Sampled estimation of the repetitivity radius R(r, eps) and C_rep.

The estimator asks: how large must R be so that every sampled r-patch
reappears, up to a translational eps-copy, inside the R-ball at every sampled
probe location? Radii run over the geometric grid {r * 1.25^j} up to R_max,
so the reported radius overshoots the true sampled value by at most 25% —
folded into crep_est as quantization, not hidden.

Sampling layout is deliberately rigid so monotonicity arguments survive:
patch centers are drawn from the points with an rng that never sees eps or R,
and probe locations sit on a fixed lexicographic grid. A pair that matches at
radius R also matches at any larger grid radius (candidates only accumulate),
and matching only gets easier as eps grows, so estimates are monotone in both
arguments by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .delone import Patch, PointSet
from .errors import InvalidInputError
from .geometry import Box, epsilon_copy
from .parallel import pmap

GRID_RATIO = 1.25
_SLACK = 1e-12


@dataclass(frozen=True)
class FailureWitness:
    """A sampled (patch center, probe location) pair unmatched within R_max."""

    patch_center: tuple[float, ...]
    location: tuple[float, ...]


@dataclass(frozen=True)
class RadiusResult:
    r: float
    eps: float
    R_est: float | None
    checked: int
    failures: int
    witness: FailureWitness | None
    grid: tuple[float, ...]

    @property
    def ok(self) -> bool:
        return self.failures == 0 and self.R_est is not None


@dataclass
class RepetitivityProfile:
    eps: float
    samples: list[RadiusResult]
    failures: list[RadiusResult]
    crep_est: float | None

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "samples": [
                {"r": s.r, "R_est": s.R_est, "checked": s.checked,
                 "failures": s.failures}
                for s in self.samples
            ],
            "failed_r": [f.r for f in self.failures],
            "crep_est": self.crep_est,
        }

    def csv_rows(self):
        header = ("r", "R_est", "checked", "failures")
        rows = [(s.r, s.R_est, s.checked, s.failures)
                for s in self.samples + self.failures]
        return header, rows


def radius_grid(r: float, R_max: float) -> list[float]:
    """The geometric radii {r * 1.25^j} not exceeding R_max."""
    grid = []
    R = r
    while R <= R_max * (1.0 + _SLACK):
        grid.append(R)
        R *= GRID_RATIO
    return grid


def _location_grid(window: Box, margin: float, count: int) -> np.ndarray:
    """First `count` nodes, lexicographically, of an even grid over the
    window shrunk by `margin` on every side."""
    lo = window.lo + margin
    hi = window.hi - margin
    if np.any(hi < lo):
        raise InvalidInputError(
            f"window too small to shrink by margin {margin} per side"
        )
    per_axis = max(1, math.ceil(count ** (1.0 / window.d)))
    axes = [
        np.linspace(lo[i], hi[i], per_axis) if per_axis > 1
        else np.array([(lo[i] + hi[i]) / 2.0])
        for i in range(window.d)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[:count]


def _pair_matches(P: PointSet, Q: Patch, y: np.ndarray, R: float,
                  r: float, eps: float, location_patch: Patch) -> bool:
    """Does the R-ball at y contain a translational eps-copy of Q?

    Candidate copy centers are y itself plus every alignment that maps some
    point of the R-patch at y onto Q's near-center point; each feasible
    candidate z (ball B(z, r) inside B(y, R)) is tested by a full eps-copy
    search between the r-patch at z and Q.
    """
    anchor_idx = int(np.argmin(np.abs(Q.points - Q.center).max(axis=1)))
    shift = Q.center - Q.points[anchor_idx]
    cands = np.concatenate([[y], location_patch.points + shift], axis=0)
    dist = np.abs(cands - y).max(axis=1)
    feasible = dist <= R - r + _SLACK
    cands = cands[feasible]
    order = np.argsort(dist[feasible], kind="stable")
    for z in cands[order]:
        target = P.patch(z, r)
        if target.size == 0:
            continue
        if epsilon_copy(target.points, Q.points, eps) is not None:
            return True
    return False


def radius_passes(P: PointSet, r: float, R: float, eps: float,
                  patch_centers, locations, threads: int = 1) -> bool:
    """All-pairs check at a single radius R (no grid quantization)."""
    if not (0 < r <= R):
        raise InvalidInputError("need 0 < r <= R")
    patches = [P.patch(np.asarray(c, dtype=float), r) for c in patch_centers]
    if any(q.truncated or q.size == 0 for q in patches):
        raise InvalidInputError("patch centers must yield untruncated nonempty patches")
    locs = [np.asarray(y, dtype=float) for y in locations]

    def one(pair):
        q, y = pair
        return _pair_matches(P, q, y, R, r, eps, P.patch(y, R))

    pairs = [(q, y) for q in patches for y in locs]
    return all(pmap(one, pairs, threads))


def repetitivity_radius(P: PointSet, r: float, eps: float,
                        probe_patches: int = 12, probe_locations: int = 12,
                        R_max: float = 100.0, seed=0,
                        threads: int = 1) -> RadiusResult:
    """Smallest grid radius making every sampled pair match, or a failure.

    Patch centers are drawn without replacement from the points whose r-ball
    stays inside the window; locations are a fixed grid at margin R_max. The
    pending pairs are rechecked at each grid radius in ascending order, so
    the per-pair match radius is the first grid radius that works.
    """
    if not (0 < r < R_max):
        raise InvalidInputError("need 0 < r < R_max")
    if eps < 0:
        raise InvalidInputError("eps must be nonnegative")
    if probe_patches < 1 or probe_locations < 1:
        raise InvalidInputError("probe counts must be >= 1")
    capacity = int(np.prod(np.floor(P.window.sides / (2.0 * R_max))))
    if capacity < probe_locations:
        raise InvalidInputError(
            f"window fits only {capacity} disjoint R_max-balls, "
            f"need {probe_locations}"
        )
    core = Box(P.window.lo + r, P.window.hi - r)
    eligible = P.indices_in(core)
    if eligible.size == 0:
        raise InvalidInputError("no point admits an untruncated r-patch")
    rng = np.random.default_rng(seed)
    take = min(probe_patches, eligible.size)
    chosen = np.sort(rng.choice(eligible, size=take, replace=False))
    patches = [P.patch(P.points[i], r) for i in chosen]
    locations = _location_grid(P.window, R_max, probe_locations)

    grid = radius_grid(r, R_max)
    pending = [(qi, yi) for qi in range(len(patches))
               for yi in range(locations.shape[0])]
    matched_at: dict[tuple[int, int], float] = {}
    for R in grid:
        loc_patches = {yi: P.patch(locations[yi], R)
                       for yi in {p[1] for p in pending}}

        def one(pair):
            qi, yi = pair
            return _pair_matches(P, patches[qi], locations[yi], R, r, eps,
                                 loc_patches[yi])

        outcomes = pmap(one, pending, threads)
        still = []
        for pair, ok in zip(pending, outcomes):
            if ok:
                matched_at[pair] = R
            else:
                still.append(pair)
        pending = still
        if not pending:
            break
    checked = len(patches) * locations.shape[0]
    if pending:
        qi, yi = pending[0]
        witness = FailureWitness(
            patch_center=tuple(patches[qi].center.tolist()),
            location=tuple(locations[yi].tolist()),
        )
        return RadiusResult(r=r, eps=eps, R_est=None, checked=checked,
                            failures=len(pending), witness=witness,
                            grid=tuple(grid))
    return RadiusResult(r=r, eps=eps, R_est=max(matched_at.values()),
                        checked=checked, failures=0, witness=None,
                        grid=tuple(grid))


def profile(P: PointSet, eps: float, r_grid, probe_patches: int = 12,
            probe_locations: int = 12, R_max: float = 100.0, seed: int = 0,
            threads: int = 1) -> RepetitivityProfile:
    """One radius estimate per r; crep_est = max over clean samples of R/r.

    Failed radii are reported in a separate list, never averaged into the
    estimate.
    """
    r_grid = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])) or not r_grid:
        raise InvalidInputError("r_grid must be nonempty and strictly increasing")
    samples: list[RadiusResult] = []
    failures: list[RadiusResult] = []
    for i, r in enumerate(r_grid):
        res = repetitivity_radius(P, r, eps, probe_patches, probe_locations,
                                  R_max, seed=[int(seed), i], threads=threads)
        (samples if res.ok else failures).append(res)
    crep = max((s.R_est / s.r for s in samples), default=None)
    return RepetitivityProfile(eps=eps, samples=samples, failures=failures,
                               crep_est=crep)
