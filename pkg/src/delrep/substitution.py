"""Multiscale box substitution schemes with exact rational arithmetic.

A scheme partitions each unit-volume prototile box into rescaled translated
copies of prototiles (homotheties only, scales rational in (0,1)). Patch
generation inflates a prototile by e^t and substitutes every tile whose
volume strictly exceeds 1. All bookkeeping (scales, offsets, volumes) is done
in Fractions; the only inexact step is the final e^t placement, performed as
one float multiplication per coordinate so tiles sharing a rational boundary
coordinate produce bitwise-equal floats.

The volume threshold e^{td} * rel_volume > 1 is decided by a certified
comparison: a float check with a wide safety margin, escalating to interval
arithmetic at increasing precision near ties. An exact tie is only possible
at t = 0 (log of a non-unit rational is irrational) and resolves to "do not
substitute" per the strict inequality.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import sympy

from .delone import PointSet
from .errors import (
    InsufficientDataError,
    InvalidInputError,
    NormalizationError,
    PartitionError,
    PrecisionError,
)
from .geometry import Box


def _frac(x) -> Fraction:
    try:
        return Fraction(x)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise InvalidInputError(f"cannot parse exact rational from {x!r}") from exc


@dataclass(frozen=True)
class ChildRule:
    """One child in a substitution rule: scale * T[type] translated by offset."""

    type: int
    scale: Fraction
    offset: tuple[Fraction, ...]


@dataclass(frozen=True)
class Scheme:
    """A validated multiscale substitution scheme over box prototiles."""

    d: int
    prototile_sides: tuple[tuple[Fraction, ...], ...]
    rules: tuple[tuple[ChildRule, ...], ...]

    @property
    def n(self) -> int:
        return len(self.prototile_sides)

    def prototile_box(self, i: int) -> Box:
        sides = self.prototile_sides[i]
        return Box(np.zeros(self.d), np.array([float(s) for s in sides]))

    def min_scale(self) -> Fraction:
        return min(c.scale for rule in self.rules for c in rule)


def _child_bounds(scheme_sides, child: ChildRule):
    lo = child.offset
    hi = tuple(o + child.scale * s for o, s in zip(child.offset, scheme_sides[child.type]))
    return lo, hi


def _validate(d, prototile_sides, rules) -> None:
    if d < 1:
        raise InvalidInputError("scheme dimension must be >= 1")
    if not prototile_sides:
        raise InvalidInputError("scheme needs at least one prototile")
    if len(rules) != len(prototile_sides):
        raise InvalidInputError("scheme needs exactly one rule per prototile")
    for i, sides in enumerate(prototile_sides):
        if len(sides) != d:
            raise InvalidInputError(f"prototile {i} has wrong dimension")
        if any(s <= 0 for s in sides):
            raise InvalidInputError(f"prototile {i} has a nonpositive side")
        vol = math.prod(sides)
        if vol != 1:
            raise NormalizationError(
                f"prototile {i} has volume {vol}, expected exactly 1"
            )
    for i, rule in enumerate(rules):
        if not rule:
            raise InvalidInputError(f"rule {i} has no children")
        parent_sides = prototile_sides[i]
        boxes = []
        for j, child in enumerate(rule):
            if not (0 <= child.type < len(prototile_sides)):
                raise InvalidInputError(f"rule {i} child {j} names unknown type")
            if not (0 < child.scale < 1):
                raise InvalidInputError(
                    f"rule {i} child {j} scale must lie strictly in (0, 1)"
                )
            if len(child.offset) != d:
                raise InvalidInputError(f"rule {i} child {j} offset has wrong dimension")
            lo, hi = _child_bounds(prototile_sides, child)
            if any(l < 0 for l in lo) or any(h > s for h, s in zip(hi, parent_sides)):
                raise PartitionError(
                    f"rule {i} child {j} exceeds its parent prototile"
                )
            boxes.append((lo, hi))
        for a, b in itertools.combinations(range(len(rule)), 2):
            (alo, ahi), (blo, bhi) = boxes[a], boxes[b]
            if all(max(l1, l2) < min(h1, h2)
                   for l1, h1, l2, h2 in zip(alo, ahi, blo, bhi)):
                raise PartitionError(
                    f"rule {i}: children {a} and {b} overlap with positive volume"
                )
        total = sum(child.scale ** d for child in rule)
        if total < 1:
            raise PartitionError(
                f"rule {i}: children leave a gap (total volume {total} < 1)"
            )
        if total > 1:
            raise PartitionError(
                f"rule {i}: children exceed the prototile (total volume {total} > 1)"
            )


def make_scheme(d, prototile_sides, rules) -> Scheme:
    """Validate exactly (rational arithmetic) and freeze a scheme."""
    sides = tuple(tuple(_frac(s) for s in p) for p in prototile_sides)
    frozen_rules = tuple(
        tuple(
            ChildRule(int(c[0]), _frac(c[1]), tuple(_frac(o) for o in c[2]))
            if not isinstance(c, ChildRule) else c
            for c in rule
        )
        for rule in rules
    )
    _validate(d, sides, frozen_rules)
    return Scheme(d=int(d), prototile_sides=sides, rules=frozen_rules)


def scheme_to_json(s: Scheme) -> dict:
    return {
        "d": s.d,
        "prototiles": [
            {"sides": [str(x) for x in sides]} for sides in s.prototile_sides
        ],
        "rules": [
            [
                {"type": c.type, "scale": str(c.scale),
                 "offset": [str(o) for o in c.offset]}
                for c in rule
            ]
            for rule in s.rules
        ],
    }


def load_scheme(source) -> Scheme:
    """Build a scheme from a JSON document (dict, path, or JSON string)."""
    if isinstance(source, Scheme):
        return source
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        try:
            if Path(text).exists():
                text = Path(text).read_text()
        except OSError:
            pass
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"scheme document is not valid JSON: {exc}") from exc
    try:
        d = doc["d"]
        sides = [p["sides"] for p in doc["prototiles"]]
        rules = [
            [(c["type"], c["scale"], c["offset"]) for c in rule]
            for rule in doc["rules"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"scheme document is missing field {exc}") from exc
    return make_scheme(d, sides, rules)


def save_scheme(s: Scheme, path) -> None:
    Path(path).write_text(json.dumps(scheme_to_json(s), sort_keys=True) + "\n")


_BUILTINS = {
    "ternary": {
        "d": 1,
        "prototiles": [{"sides": ["1"]}],
        "rules": [[
            {"type": 0, "scale": "1/3", "offset": ["0"]},
            {"type": 0, "scale": "2/3", "offset": ["1/3"]},
        ]],
    },
    "half-split": {
        "d": 1,
        "prototiles": [{"sides": ["1"]}],
        "rules": [[
            {"type": 0, "scale": "1/2", "offset": ["0"]},
            {"type": 0, "scale": "1/2", "offset": ["1/2"]},
        ]],
    },
    "corner": {
        "d": 2,
        "prototiles": [{"sides": ["1", "1"]}],
        "rules": [[
            {"type": 0, "scale": "2/3", "offset": ["0", "0"]},
            {"type": 0, "scale": "1/3", "offset": ["0", "2/3"]},
            {"type": 0, "scale": "1/3", "offset": ["1/3", "2/3"]},
            {"type": 0, "scale": "1/3", "offset": ["2/3", "2/3"]},
            {"type": 0, "scale": "1/3", "offset": ["2/3", "0"]},
            {"type": 0, "scale": "1/3", "offset": ["2/3", "1/3"]},
        ]],
    },
}


def example_scheme(name: str) -> Scheme:
    """Built-in schemes: "ternary" (1-D, scales 1/3 + 2/3), "half-split"
    (1-D, commensurable), "corner" (2-D, one 2/3-square + five 1/3-squares)."""
    if name not in _BUILTINS:
        raise InvalidInputError(
            f"unknown builtin scheme {name!r}; available: {sorted(_BUILTINS)}"
        )
    return load_scheme(_BUILTINS[name])


# -- graph checks -------------------------------------------------------------


def _edges(s: Scheme):
    for i, rule in enumerate(s.rules):
        for child in rule:
            yield i, child.type, child.scale


def check_irreducible(s: Scheme) -> bool:
    """True iff every prototile type is reachable from every other."""
    n = s.n
    adj = [set() for _ in range(n)]
    for i, j, _ in _edges(s):
        adj[i].add(j)
    for start in range(n):
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != n:
            return False
    return True


@dataclass(frozen=True)
class IncommensurabilityResult:
    incommensurable: bool
    rank: int
    generators: tuple[Fraction, ...]
    witness: tuple[Fraction, Fraction] | None


def _prime_exponents(x: Fraction) -> dict[int, int]:
    fac = {int(p): int(e) for p, e in sympy.factorint(x.numerator).items()}
    for p, e in sympy.factorint(x.denominator).items():
        fac[int(p)] = fac.get(int(p), 0) - int(e)
    return {p: e for p, e in fac.items() if e != 0}


def check_incommensurable(s: Scheme) -> IncommensurabilityResult:
    """Decide incommensurability of the scheme's scale cycle products, exactly.

    Over a strongly connected substitution graph, the multiplicative group of
    directed-cycle scale products is generated by the closed-walk products
    through a base vertex built from per-vertex path potentials: one generator
    per edge plus one per vertex. The scheme is incommensurable iff the prime
    exponent vectors of these rationals span a lattice of rank >= 2; the
    witness is a multiplicatively independent pair of cycle products.
    """
    if not check_irreducible(s):
        raise InvalidInputError("incommensurability requires an irreducible scheme")
    edges = list(_edges(s))
    n = s.n
    # Path potentials base -> v and v -> base along directed edges.
    p: dict[int, Fraction] = {0: Fraction(1)}
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for i, j, scale in edges:
            if i == v and j not in p:
                p[j] = p[v] * scale
                frontier.append(j)
    r: dict[int, Fraction] = {0: Fraction(1)}
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for i, j, scale in edges:
            if j == v and i not in r:
                r[i] = scale * r[v]
                frontier.append(i)
    gens: list[Fraction] = []
    for i, j, scale in edges:
        gens.append(p[i] * scale * r[j])
    for v in range(1, n):
        gens.append(p[v] * r[v])
    factored = [_prime_exponents(g) for g in gens]
    primes = sorted({q for fac in factored for q in fac})
    vectors = [[fac.get(p, 0) for p in primes] for fac in factored]
    rank = sympy.Matrix(vectors).rank() if primes else 0
    witness = None
    if rank >= 2:
        first = next(k for k, v in enumerate(vectors) if any(v))
        for k in range(first + 1, len(vectors)):
            if sympy.Matrix([vectors[first], vectors[k]]).rank() == 2:
                witness = (gens[first], gens[k])
                break
    return IncommensurabilityResult(
        incommensurable=rank >= 2,
        rank=int(rank),
        generators=tuple(gens),
        witness=witness,
    )


# -- certified volume threshold ----------------------------------------------

_FLOAT_MARGIN = 1e-9
_PRECISIONS = (120, 240, 480, 960)


def _exceeds_unit(t: float, d: int, rel_volume: Fraction) -> bool:
    """Decide e^{t d} * rel_volume > 1 with a certified comparison.

    Equivalent to t*d > log(den/num). The right side is irrational unless
    rel_volume == 1, so interval escalation always terminates; the t = 0 /
    rel_volume = 1 tie resolves to False per the strict inequality.
    """
    num, den = rel_volume.numerator, rel_volume.denominator
    if num == den:
        return t > 0
    lhs = t * d
    try:
        rhs = math.log(den) - math.log(num)
    except OverflowError:
        rhs = float(mpmath.log(mpmath.mpf(den)) - mpmath.log(mpmath.mpf(num)))
    if abs(lhs - rhs) > _FLOAT_MARGIN:
        return lhs > rhs
    iv = mpmath.iv
    saved = iv.prec
    try:
        for prec in _PRECISIONS:
            iv.prec = prec
            diff = iv.mpf(t) * d - (iv.log(iv.mpf(den)) - iv.log(iv.mpf(num)))
            if diff.a > 0:
                return True
            if diff.b < 0:
                return False
    finally:
        iv.prec = saved
    raise PrecisionError(
        f"volume comparison for t={t!r}, rel_volume={rel_volume} undecided "
        f"at {_PRECISIONS[-1]} bits"
    )


# -- patch generation ---------------------------------------------------------


@dataclass(frozen=True)
class TileInstance:
    """A tile of a generated patch, in unit (pre-inflation) coordinates."""

    type: int
    rel_scale: Fraction
    offset: tuple[Fraction, ...]
    rel_volume: Fraction


@dataclass
class GeneratedPatch:
    scheme: Scheme
    root_type: int
    t: float
    tiles: list[TileInstance]
    counts: dict[int, int]

    @property
    def size(self) -> int:
        return len(self.tiles)

    def inflation(self) -> float:
        return math.exp(self.t)

    def volume_identity(self) -> Fraction:
        """Sum of relative tile volumes; exactly 1 for a valid patch."""
        return sum((tile.rel_volume for tile in self.tiles), Fraction(0))

    def distinct_rel_volumes(self) -> list[Fraction]:
        return sorted({tile.rel_volume for tile in self.tiles})

    def tile_box(self, tile: TileInstance) -> Box:
        """Realized tile box; shared rational boundaries map to equal floats."""
        f = self.inflation()
        sides = self.scheme.prototile_sides[tile.type]
        lo = np.array([f * float(o) for o in tile.offset])
        hi = np.array([
            f * float(o + tile.rel_scale * s) for o, s in zip(tile.offset, sides)
        ])
        return Box(lo, hi)

    def boxes(self) -> list[Box]:
        return [self.tile_box(tile) for tile in self.tiles]

    def supp_box(self) -> Box:
        f = self.inflation()
        sides = self.scheme.prototile_sides[self.root_type]
        return Box(np.zeros(self.scheme.d), np.array([f * float(s) for s in sides]))

    def max_tile_diameter(self) -> float:
        """Largest sup-norm tile diameter (max realized side length)."""
        f = self.inflation()
        best = max(
            tile.rel_scale * max(self.scheme.prototile_sides[tile.type])
            for tile in self.tiles
        )
        return f * float(best)

    def core_window(self) -> Box:
        """Support shrunk by the largest tile diameter on every side."""
        m = self.max_tile_diameter()
        supp = self.supp_box()
        if not np.all(supp.sides > 2 * m):
            raise InvalidInputError(
                "patch support too small to shrink by its largest tile diameter"
            )
        return Box(supp.lo + m, supp.hi - m)


def generate_patch(s: Scheme, root_type: int, t: float) -> GeneratedPatch:
    """Substitute, starting from e^t * T[root_type], every tile of volume > 1.

    Tiles are emitted in depth-first rule order. Relative scales, offsets and
    volumes stay exact rationals; the strict volume threshold is decided by
    the certified comparator with memoization per distinct rel_volume.
    """
    if not isinstance(root_type, int) or not (0 <= root_type < s.n):
        raise InvalidInputError(f"root type {root_type!r} out of range")
    if not (t >= 0 and math.isfinite(t)):
        raise InvalidInputError("t must be finite and >= 0")
    d = s.d
    memo: dict[tuple[int, int], bool] = {}

    def splits(rel_volume: Fraction) -> bool:
        key = (rel_volume.numerator, rel_volume.denominator)
        if key not in memo:
            memo[key] = _exceeds_unit(t, d, rel_volume)
        return memo[key]

    tiles: list[TileInstance] = []
    zero = tuple(Fraction(0) for _ in range(d))

    def rec(type_idx: int, rel_scale: Fraction, offset: tuple[Fraction, ...]):
        rel_volume = rel_scale ** d
        if splits(rel_volume):
            for child in s.rules[type_idx]:
                child_offset = tuple(
                    o + rel_scale * co for o, co in zip(offset, child.offset)
                )
                rec(child.type, rel_scale * child.scale, child_offset)
        else:
            tiles.append(TileInstance(type_idx, rel_scale, offset, rel_volume))

    rec(root_type, Fraction(1), zero)
    counts = Counter(tile.type for tile in tiles)
    return GeneratedPatch(scheme=s, root_type=root_type, t=float(t),
                          tiles=tiles, counts=dict(counts))


@dataclass(frozen=True)
class ScanRow:
    t: float
    count: int
    distinct_rel_volumes: int


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares fit of log(count) = log(c7) + d*t - k*log(t)."""

    c7: float
    k: float
    r2: float


def tile_count_scan(s: Scheme, root_type: int, t_grid) -> list[ScanRow]:
    """#F_t and the number of distinct tile volumes along an increasing grid."""
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise InvalidInputError("t_grid must be strictly increasing")
    rows = []
    for t in t_grid:
        patch = generate_patch(s, root_type, t)
        rows.append(ScanRow(t=t, count=patch.size,
                            distinct_rel_volumes=len(patch.distinct_rel_volumes())))
    return rows


def fit_growth(rows: list[ScanRow], d: int, t_min: float = 1.0) -> GrowthFit:
    """Fit the growth law count ~ c7 * e^{td} / t^k on rows with t >= t_min."""
    pts = [(row.t, row.count) for row in rows if row.t >= t_min]
    if len(pts) < 3:
        raise InsufficientDataError(
            f"growth fit needs >= 3 scan rows with t >= {t_min}"
        )
    ts = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts]) - d * ts
    x = np.log(ts)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-18 else 0.0)
    return GrowthFit(c7=float(np.exp(intercept)), k=float(-slope), r2=r2)


def extract_delone(patch: GeneratedPatch, markings) -> PointSet:
    """One point per tile at the tile's image of its prototile marking.

    Markings are exact rationals strictly interior to each prototile. The
    PointSet window is the full patch support (known exactly, since the tiles
    partition it); use patch.core_window() for boundary-robust statistics.
    """
    s = patch.scheme
    marks = [tuple(_frac(x) for x in m) for m in markings]
    if len(marks) != s.n:
        raise InvalidInputError("need exactly one marking per prototile")
    for i, m in enumerate(marks):
        if len(m) != s.d:
            raise InvalidInputError(f"marking {i} has wrong dimension")
        if any(not (0 < x < side) for x, side in zip(m, s.prototile_sides[i])):
            raise InvalidInputError(
                f"marking {i} must be strictly interior to its prototile"
            )
    f = patch.inflation()
    pts = np.empty((patch.size, s.d))
    for row, tile in enumerate(patch.tiles):
        m = marks[tile.type]
        pts[row] = [
            f * float(o + tile.rel_scale * x) for o, x in zip(tile.offset, m)
        ]
    meta = {
        "kind": "substitution",
        "root_type": patch.root_type,
        "t": patch.t,
        "markings": [[str(x) for x in m] for m in marks],
    }
    return PointSet(pts, patch.supp_box(), meta=meta)


def patch_boundary_cloud(patch: GeneratedPatch, resolution: float) -> np.ndarray:
    """Sample the union of tile boundaries at spacing <= resolution.

    Shared boundary points across adjacent tiles coincide bitwise and are
    deduplicated exactly.
    """
    if not resolution > 0:
        raise InvalidInputError("resolution must be positive")
    rows = []
    for box in patch.boxes():
        if box.d == 1:
            rows.append([box.lo[0]])
            rows.append([box.hi[0]])
            continue
        axes_grids = [
            np.linspace(box.lo[i], box.hi[i],
                        int(np.ceil(box.sides[i] / resolution)) + 1)
            for i in range(box.d)
        ]
        for ax in range(box.d):
            others = [axes_grids[i] for i in range(box.d) if i != ax]
            for face_val in (box.lo[ax], box.hi[ax]):
                mesh = np.meshgrid(*others, indexing="ij") if others else []
                face = np.stack([m.ravel() for m in mesh], axis=1)
                full = np.empty((face.shape[0], box.d))
                cols = [i for i in range(box.d) if i != ax]
                full[:, cols] = face
                full[:, ax] = face_val
                rows.append(full)
    if patch.scheme.d == 1:
        cloud = np.array(sorted({r[0] for r in rows})).reshape(-1, 1)
        return cloud
    return np.unique(np.concatenate(rows, axis=0), axis=0)


def save_patch_csv(patch: GeneratedPatch, path) -> None:
    """Tile rows: type, rel_volume numerator, denominator, placement coords."""
    f = patch.inflation()
    lines = []
    for tile in patch.tiles:
        place = [repr(f * float(o)) for o in tile.offset]
        lines.append(",".join(
            [str(tile.type), str(tile.rel_volume.numerator),
             str(tile.rel_volume.denominator)] + place
        ))
    Path(path).write_text("\n".join(lines) + "\n")
