"""Weight distributions, density extremes, exponents, and discrepancy scans.

A weight distribution assigns boxes (and optionally unit-cube unions) a real
value whose magnitude per unit volume stays below a declared constant Cw; the
bound is re-checked on every evaluation and a violation raises a contract
error rather than returning a value. Density extremes mu+/-(t) are sampled
sup/inf of w(B)/vol(B) over squarish boxes (sides in [t, 2t]); their gap
decaying like t^-delta is the quantity the discrepancy exponent is fitted
from. The Burago-Kleiner diagnostic sums windowed sup terms over dyadic ball
radii; the finite probe makes every reported term a lower bound on the true
sup, and the schema says so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .delone import Patch, PointSet
from .dyadic import CubeUnion, DyadicCube
from .errors import (
    ContractError,
    InfeasibleScaleError,
    InsufficientDataError,
    InvalidInputError,
)
from .geometry import Box, SquarishClass, hausdorff_distance
from .parallel import pmap

_BOUND_TOL = 1.0 + 1e-12


def _region_volume(region) -> float:
    if isinstance(region, Box):
        return region.vol
    if isinstance(region, (CubeUnion, DyadicCube)):
        return float(region.volume)
    raise InvalidInputError(f"unsupported region type {type(region).__name__}")


@dataclass
class WeightDistribution:
    """A bounded, approximately additive box weight.

    evaluator maps a region to a float (p = 1 throughout this package; the
    field exists so vector-valued weights can share the contract). Every
    evaluation checks |w(region)| / vol(region) <= cw and the minimum-width
    domain guard t0; violations raise rather than propagate bad values.
    """

    evaluator: object
    cw: float
    t0: float
    label: str
    p: int = 1
    supports_unions: bool = False

    def __post_init__(self):
        if self.cw < 1:
            raise InvalidInputError("cw must be >= 1")
        if self.t0 < 0:
            raise InvalidInputError("t0 must be >= 0")

    def evaluate(self, region) -> float:
        if isinstance(region, Box):
            if region.width < self.t0 - 1e-12:
                raise InvalidInputError(
                    f"box width {region.width} below weight domain minimum {self.t0}"
                )
        elif isinstance(region, (CubeUnion, DyadicCube)):
            if not self.supports_unions:
                raise InvalidInputError(
                    f"weight {self.label!r} does not support cube unions"
                )
        else:
            raise InvalidInputError(
                f"unsupported region type {type(region).__name__}"
            )
        value = float(self.evaluator(region))
        vol = _region_volume(region)
        if abs(value) > self.cw * vol * _BOUND_TOL:
            raise ContractError(
                f"weight {self.label!r} violated boundedness: |{value}| > "
                f"cw={self.cw} * vol={vol}"
            )
        return value


def point_count_cw(P: PointSet) -> float:
    """ceil((1/r + 1)^d): a valid boundedness constant for sup-norm packing
    radius r, on boxes of width >= 1."""
    r = P.packing_radius()
    return float(math.ceil((1.0 / r + 1.0) ** P.d))


def weight_point_count(P: PointSet) -> WeightDistribution:
    """The counting weight N(B); exact, additive, union-capable."""
    return WeightDistribution(
        evaluator=P.count,
        cw=point_count_cw(P),
        t0=1.0,
        label="point-count",
        supports_unions=True,
    )


def _points_in_region(P: PointSet, region) -> np.ndarray:
    if isinstance(region, Box):
        return P.points[P.indices_in(region)]
    if isinstance(region, DyadicCube):
        region = region.cube_union()
    lo, hi = region.bbox()
    idx = P.indices_in(Box(lo.astype(float), hi.astype(float)))
    pts = P.points[idx]
    floored = np.floor(pts).astype(np.int64)
    keep = [i for i, cell in enumerate(map(tuple, floored)) if cell in region.cells]
    return pts[keep]


def weight_patch_count(P: PointSet, Q: Patch, eps: float) -> WeightDistribution:
    """Count points of the region that are centers of an eps-copy of Q.

    A point x counts when the patch at x of radius Q.radius, translated to
    pin x onto Q's center, is within Hausdorff distance eps of Q. Patches
    truncated by the window are never counted (a truncated patch cannot
    certify a copy), which keeps the evaluator total near the boundary.
    """
    if Q.truncated:
        raise InvalidInputError("reference patch is window-truncated")
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    template = Q.points - Q.center

    def evaluator(region) -> float:
        pts = _points_in_region(P, region)
        hits = 0
        for x in pts:
            cand = P.patch(x, Q.radius)
            if cand.truncated or cand.size != Q.size:
                continue
            if hausdorff_distance(cand.points, template + x) <= eps:
                hits += 1
        return float(hits)

    return WeightDistribution(
        evaluator=evaluator,
        cw=point_count_cw(P),
        t0=1.0,
        label=f"patch-count(r={Q.radius}, eps={eps})",
        supports_unions=True,
    )


def volume_weight(c: float = 1.0) -> WeightDistribution:
    """Synthetic exactly-additive weight w(B) = c * vol(B)."""
    return WeightDistribution(
        evaluator=lambda region: c * _region_volume(region),
        cw=max(1.0, abs(c)),
        t0=0.0,
        label=f"volume*{c}",
        supports_unions=True,
    )


# -- density extremes ---------------------------------------------------------


@dataclass
class DensityCurve:
    t_grid: list[float]
    mu_plus: list[float]
    mu_minus: list[float]
    delta_gap: list[float]
    mu_est: float
    mu_err: float
    samples_per_t: int

    def to_json(self) -> dict:
        return {
            "t_grid": self.t_grid,
            "mu_plus": self.mu_plus,
            "mu_minus": self.mu_minus,
            "delta_gap": self.delta_gap,
            "mu_est": self.mu_est,
            "mu_err": self.mu_err,
            "samples_per_t": self.samples_per_t,
        }

    def csv_rows(self):
        header = ("t", "mu_plus", "mu_minus", "delta_gap")
        rows = list(zip(self.t_grid, self.mu_plus, self.mu_minus, self.delta_gap))
        return header, rows


def density_extremes(w: WeightDistribution, t: float, window: Box,
                     samples: int, seed) -> tuple[float, float]:
    """Sampled sup and inf of w(B)/vol(B) over squarish boxes of scale t."""
    if t < w.t0:
        raise InvalidInputError(f"t={t} below the weight's domain minimum {w.t0}")
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    cls = SquarishClass(t)
    if np.any(window.sides < 2.0 * t):
        raise InvalidInputError(
            f"window sides must be >= 2t={2 * t} to sample squarish boxes"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ratios = np.empty(samples)
    for i in range(samples):
        box = cls.sample(window, rng)
        ratios[i] = w.evaluate(box) / box.vol
    return float(ratios.max()), float(ratios.min())


def density_curve(w: WeightDistribution, t_grid, window: Box, samples: int,
                  seed: int, threads: int = 1) -> DensityCurve:
    """Per-scale extremes; mu is estimated at the largest feasible scale.

    The estimate is the midpoint of [mu-, mu+] at max(t_grid) with half the
    gap as its error bar; the limits exist but no convergence rate is
    assumed, so uncertainty is reported instead of asserted away.
    """
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])) or not t_grid:
        raise InvalidInputError("t_grid must be nonempty and strictly increasing")

    def one(item):
        i, t = item
        return density_extremes(w, t, window, samples,
                                np.random.default_rng([_mix_seed(seed), i]))

    results = pmap(one, list(enumerate(t_grid)), threads)
    mu_plus = [res[0] for res in results]
    mu_minus = [res[1] for res in results]
    gaps = [a - b for a, b in zip(mu_plus, mu_minus)]
    mu_est = 0.5 * (mu_plus[-1] + mu_minus[-1])
    return DensityCurve(
        t_grid=t_grid,
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        delta_gap=gaps,
        mu_est=mu_est,
        mu_err=0.5 * gaps[-1],
        samples_per_t=samples,
    )


def _mix_seed(seed) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


# -- exponents ----------------------------------------------------------------


def theoretical_delta(crep: float, d: int) -> float:
    """delta = log(1/(1 - (4*crep)^-d)) / log(2*crep); always in (0, 1/2).

    The d = 1, crep = 1 extreme equals log(4/3)/log(2) ~ 0.41504, the largest
    value the formula attains.
    """
    if crep < 1:
        raise InvalidInputError("crep must be >= 1")
    if not isinstance(d, int) or d < 1:
        raise InvalidInputError("d must be an integer >= 1")
    c2 = 2.0 * crep
    return math.log(1.0 / (1.0 - (2.0 * c2) ** (-d))) / math.log(c2)


@dataclass(frozen=True)
class PowerLawFit:
    delta_emp: float
    alpha_fit: float
    r2: float


def fit_delta(curve: DensityCurve) -> PowerLawFit:
    """Least-squares fit of log gap(t) = log(alpha) - delta * log(t).

    Zero-gap grid points carry no slope information and are dropped; fewer
    than 4 surviving points is insufficient data.
    """
    ts, gaps = [], []
    for t, g in zip(curve.t_grid, curve.delta_gap):
        if g > 0:
            ts.append(t)
            gaps.append(g)
    if len(ts) < 4:
        raise InsufficientDataError(
            f"power-law fit needs >= 4 points with positive gap, have {len(ts)}"
        )
    x = np.log(ts)
    y = np.log(gaps)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-18 else 0.0)
    return PowerLawFit(delta_emp=float(-slope), alpha_fit=float(np.exp(intercept)),
                       r2=r2)


# -- box discrepancy scan -----------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    box: Box
    weight: float
    vol: float
    width: float
    discrepancy: float
    bound: float


@dataclass
class DiscrepancyReport:
    rows: list[ScanRow]
    alpha_fit: float
    delta_used: float
    mu_used: float
    boundary_decay_r2: float
    mu_suspect: bool

    def to_json(self) -> dict:
        return {
            "alpha_fit": self.alpha_fit,
            "delta_used": self.delta_used,
            "mu_used": self.mu_used,
            "boundary_decay_r2": self.boundary_decay_r2,
            "mu_suspect": self.mu_suspect,
            "rows": len(self.rows),
        }

    def csv_rows(self):
        header = ("lo", "hi", "weight", "vol", "width", "discrepancy", "bound")
        rows = [
            (";".join(repr(v) for v in row.box.lo.tolist()),
             ";".join(repr(v) for v in row.box.hi.tolist()),
             row.weight, row.vol, row.width, row.discrepancy, row.bound)
            for row in self.rows
        ]
        return header, rows


def _decay_diagnostic(rows: list[ScanRow]) -> tuple[float, bool]:
    """Fixed-slope -1 fit of log(disc/vol) against log(width).

    A correct mu leaves a boundary-driven discrepancy ~ vol/width, so the
    model fits (r2 >= 0); a wrong mu makes disc/vol nearly constant and the
    forced slope produces r2 < 0.
    """
    pts = [(r.width, r.discrepancy / r.vol) for r in rows if r.discrepancy > 0]
    if len(pts) < 3:
        return float("nan"), False
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    c = float(np.mean(y + x))
    pred = c - x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return (1.0, False) if ss_res < 1e-18 else (float("-inf"), True)
    r2 = 1.0 - ss_res / ss_tot
    return r2, r2 < 0


def discrepancy_scan(P: PointSet, mu: float, delta: float, boxes: int,
                     t_range: tuple[float, float], window: Box | None = None,
                     seed: int = 0, threads: int = 1) -> DiscrepancyReport:
    """Per-box |N(B) - mu vol(B)| with the tightest sample-consistent alpha.

    alpha_fit = max over rows of discrepancy * width^delta / vol, so every
    row satisfies discrepancy <= alpha_fit * vol / width^delta by
    construction; the reported bound column uses alpha_fit.
    """
    if not mu > 0:
        raise InvalidInputError("mu must be positive")
    if not (0.0 < delta < 1.0):
        raise InvalidInputError("delta must lie in (0, 1)")
    if boxes < 1:
        raise InvalidInputError("boxes must be >= 1")
    t_min, t_max = float(t_range[0]), float(t_range[1])
    if not (0 < t_min <= t_max):
        raise InvalidInputError("need 0 < t_min <= t_max")
    if window is None:
        window = P.window
    elif not P.window.contains_box(window):
        raise InvalidInputError("sampling window exceeds the point-set window")
    if np.any(window.sides < t_max):
        raise InvalidInputError("window sides must be >= t_max")
    rng = np.random.default_rng(seed)
    sampled = []
    for _ in range(boxes):
        sides = rng.uniform(t_min, t_max, size=P.d)
        lo = window.lo + rng.uniform(0.0, 1.0, size=P.d) * (window.sides - sides)
        sampled.append(Box(lo, lo + sides))

    def one(box: Box) -> ScanRow:
        w = float(P.count(box))
        vol = box.vol
        disc = abs(w - mu * vol)
        return ScanRow(box=box, weight=w, vol=vol, width=box.width,
                       discrepancy=disc, bound=0.0)

    rows = pmap(one, sampled, threads)
    alpha_fit = max(row.discrepancy * row.width ** delta / row.vol for row in rows)
    rows = [
        ScanRow(box=r.box, weight=r.weight, vol=r.vol, width=r.width,
                discrepancy=r.discrepancy,
                bound=alpha_fit * r.vol / r.width ** delta)
        for r in rows
    ]
    r2, suspect = _decay_diagnostic(rows)
    return DiscrepancyReport(rows=rows, alpha_fit=float(alpha_fit),
                             delta_used=delta, mu_used=mu,
                             boundary_decay_r2=r2, mu_suspect=suspect)


# -- Burago-Kleiner partial sums ----------------------------------------------


@dataclass(frozen=True)
class BKRow:
    k: int
    sup_term: float
    partial_sum: float
    centers_probed: int
    centers_skipped: int


def bk_partial_sum(P: PointSet, rho: float, k_max: int, centers_window: Box,
                   k_min: int = 0, max_centers_per_k: int = 256,
                   threads: int = 1) -> list[BKRow]:
    """Windowed lower bounds on sup_x |N(B(x, 2^k)) - rho vol| / vol, summed.

    Probes integer centers in centers_window (balls are closed sup-norm boxes
    x +- 2^k). Centers whose ball escapes the point-set window are skipped
    and counted; a scale where every center escapes is infeasible. At most
    max_centers_per_k centers are evaluated per scale, chosen by a
    deterministic stride over the lexicographic center list — terms are
    therefore lower bounds on even the windowed sup.
    """
    if k_max < k_min or k_min < 0:
        raise InvalidInputError("need 0 <= k_min <= k_max")
    if max_centers_per_k < 1:
        raise InvalidInputError("max_centers_per_k must be >= 1")
    axes = []
    for i in range(P.d):
        a = int(np.ceil(centers_window.lo[i] - 1e-9))
        b = int(np.floor(centers_window.hi[i] + 1e-9))
        if b < a:
            raise InvalidInputError("centers window contains no integer point")
        axes.append(np.arange(a, b + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1).astype(float)

    def one(k: int) -> tuple[int, float, int, int]:
        radius = float(2 ** k)
        ok = np.logical_and(centers - radius >= P.window.lo,
                            centers + radius <= P.window.hi).all(axis=1)
        feasible = centers[ok]
        skipped = centers.shape[0] - feasible.shape[0]
        if feasible.shape[0] == 0:
            raise InfeasibleScaleError(
                f"no probe center admits radius 2^{k} inside the window"
            )
        stride = max(1, feasible.shape[0] // max_centers_per_k)
        probe = feasible[::stride][:max_centers_per_k]
        vol = (2.0 * radius) ** P.d
        best = 0.0
        for x in probe:
            n = P.count(Box(x - radius, x + radius))
            best = max(best, abs(n - rho * vol) / vol)
        return k, best, probe.shape[0], skipped

    results = pmap(one, list(range(k_min, k_max + 1)), threads)
    rows = []
    running = 0.0
    for k, term, probed, skipped in results:
        running += term
        rows.append(BKRow(k=k, sup_term=term, partial_sum=running,
                          centers_probed=probed, centers_skipped=skipped))
    return rows


def bk_csv_rows(rows: list[BKRow]):
    header = ("k", "sup_term", "partial_sum")
    return header, [(r.k, r.sup_term, r.partial_sum) for r in rows]
