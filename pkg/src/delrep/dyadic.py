"""Unit-cube unions, dyadic cubes, and a constructive cube decomposition.

A CubeUnion is a finite union of half-open unit lattice cubes [a, a+1)^d with
integer corners a. A DyadicCube of scale k is the half-open cube of side 2^k
whose corner lies in (2^k Z)^d. Set-system expressions (SSExpression) combine
dyadic cubes by disjoint union and proper difference, each cube used at most
once, which keeps additive weights exactly evaluable down the tree.

The decomposition here is constructive: recursing from an enclosing dyadic
cube, a subcube entirely inside the target is a positive leaf, an entirely
disjoint subcube is dropped, a subcube covered by the target on more than half
its volume is emitted whole with its complement decomposed recursively and
subtracted, and anything else recurses on the 2^d children in lexicographic
corner order. Leaf counts per scale are reported so the surface-area bound
count_k <= C * area(U) / 2^(k(d-1)) can be checked empirically.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, StructuralError
from .geometry import Box


class CubeUnion:
    """Finite union of half-open unit lattice cubes, stored by integer corners."""

    __slots__ = ("cells", "d")

    def __init__(self, cells, d: int | None = None):
        cells = list(cells)
        if not cells:
            if d is None:
                raise InvalidInputError("empty cube union requires an explicit dimension")
            self.cells = frozenset()
            self.d = int(d)
            return
        norm = []
        for c in cells:
            tup = tuple(int(x) for x in np.atleast_1d(np.asarray(c)))
            norm.append(tup)
        dims = {len(t) for t in norm}
        if len(dims) != 1:
            raise InvalidInputError("cube union cells have inconsistent dimensions")
        self.d = dims.pop()
        if d is not None and int(d) != self.d:
            raise InvalidInputError("cube union dimension does not match cells")
        self.cells = frozenset(norm)

    @property
    def volume(self) -> int:
        return len(self.cells)

    @property
    def area(self) -> int:
        """Number of exposed unit faces; counts boundary endpoints when d == 1."""
        total = 0
        for cell in self.cells:
            for axis in range(self.d):
                for delta in (-1, 1):
                    nb = list(cell)
                    nb[axis] += delta
                    if tuple(nb) not in self.cells:
                        total += 1
        return total

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer (lo, hi) with the union inside [lo, hi); hi is exclusive."""
        if not self.cells:
            raise InvalidInputError("empty cube union has no bounding box")
        arr = self.as_array()
        return arr.min(axis=0), arr.max(axis=0) + 1

    def as_array(self) -> np.ndarray:
        """Cells as an (m, d) int array in lexicographic order."""
        if not self.cells:
            return np.empty((0, self.d), dtype=np.int64)
        arr = np.array(sorted(self.cells), dtype=np.int64)
        return arr

    def translate(self, v) -> "CubeUnion":
        v = tuple(int(x) for x in np.atleast_1d(np.asarray(v)))
        return CubeUnion([tuple(a + b for a, b in zip(c, v)) for c in self.cells], d=self.d)

    def __contains__(self, cell) -> bool:
        return tuple(int(x) for x in cell) in self.cells

    def __eq__(self, other) -> bool:
        return isinstance(other, CubeUnion) and self.cells == other.cells and self.d == other.d

    def __hash__(self):
        return hash((self.cells, self.d))

    def __len__(self) -> int:
        return len(self.cells)

    def __repr__(self) -> str:
        return f"CubeUnion(d={self.d}, volume={self.volume})"

    def save_csv(self, path) -> None:
        rows = self.as_array()
        text = "\n".join(",".join(str(int(v)) for v in row) for row in rows)
        Path(path).write_text(text + "\n")

    @classmethod
    def load_csv(cls, path) -> "CubeUnion":
        arr = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
        return cls([tuple(row) for row in arr])


@dataclass(frozen=True)
class DyadicCube:
    """Half-open cube [corner, corner + 2^k)^d with corner in (2^k Z)^d."""

    k: int
    corner: tuple[int, ...]

    def __post_init__(self):
        if self.k < 0:
            raise InvalidInputError("dyadic scale k must be nonnegative")
        side = 1 << self.k
        if any(c % side != 0 for c in self.corner):
            raise InvalidInputError(
                f"dyadic corner {self.corner} is not aligned to side {side}"
            )

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> int:
        return 1 << self.k

    @property
    def volume(self) -> int:
        return self.side ** self.d

    def contains_cell(self, cell) -> bool:
        s = self.side
        return all(c0 <= c < c0 + s for c, c0 in zip(cell, self.corner))

    def contains_cube(self, other: "DyadicCube") -> bool:
        s = self.side
        return all(
            c0 <= o and o + other.side <= c0 + s
            for o, c0 in zip(other.corner, self.corner)
        )

    def children(self) -> list["DyadicCube"]:
        """The 2^d half-scale subcubes in lexicographic corner order."""
        if self.k == 0:
            raise InvalidInputError("a unit cube has no dyadic children")
        half = self.side // 2
        out = []
        for bits in itertools.product((0, 1), repeat=self.d):
            corner = tuple(c + b * half for c, b in zip(self.corner, bits))
            out.append(DyadicCube(self.k - 1, corner))
        out.sort(key=lambda c: c.corner)
        return out

    def cube_union(self) -> CubeUnion:
        ranges = [range(c, c + self.side) for c in self.corner]
        return CubeUnion(list(itertools.product(*ranges)), d=self.d)

    def as_box(self) -> Box:
        lo = np.array(self.corner, dtype=float)
        return Box(lo, lo + self.side)

    def to_json(self) -> dict:
        return {"k": self.k, "corner": list(self.corner)}

    @classmethod
    def from_json(cls, doc: dict) -> "DyadicCube":
        return cls(int(doc["k"]), tuple(int(c) for c in doc["corner"]))


class SSExpression:
    """Set-system expression over dyadic cubes.

    op is one of "leaf" (a single cube), "union" (disjoint union of children)
    or "diff" (proper difference left minus right). Evaluation of additive
    weights descends the tree: union sums, difference subtracts.
    """

    __slots__ = ("op", "cube", "children")

    def __init__(self, op: str, cube: DyadicCube | None = None, children=()):
        if op not in ("leaf", "union", "diff"):
            raise InvalidInputError(f"unknown expression op {op!r}")
        if op == "leaf" and cube is None:
            raise InvalidInputError("leaf expression requires a cube")
        if op == "union" and len(children) < 1:
            raise InvalidInputError("union expression requires children")
        if op == "diff" and len(children) != 2:
            raise InvalidInputError("difference expression requires exactly two children")
        self.op = op
        self.cube = cube
        self.children = tuple(children)

    def leaves(self):
        if self.op == "leaf":
            yield self.cube
        else:
            for ch in self.children:
                yield from ch.leaves()

    def node_count(self) -> int:
        if self.op == "leaf":
            return 1
        return 1 + sum(ch.node_count() for ch in self.children)

    def to_json(self) -> dict:
        if self.op == "leaf":
            return {"op": "leaf", "cube": self.cube.to_json()}
        if self.op == "union":
            return {"op": "union", "children": [c.to_json() for c in self.children]}
        return {
            "op": "diff",
            "left": self.children[0].to_json(),
            "right": self.children[1].to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SSExpression":
        op = doc["op"]
        if op == "leaf":
            return ss_leaf(DyadicCube.from_json(doc["cube"]))
        if op == "union":
            return SSExpression("union", children=[cls.from_json(c) for c in doc["children"]])
        if op == "diff":
            return ss_diff(cls.from_json(doc["left"]), cls.from_json(doc["right"]))
        raise InvalidInputError(f"unknown expression op {op!r}")

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")


def ss_leaf(cube: DyadicCube) -> SSExpression:
    return SSExpression("leaf", cube=cube)


def ss_union(*exprs: SSExpression) -> SSExpression:
    if len(exprs) == 1:
        return exprs[0]
    return SSExpression("union", children=exprs)


def ss_diff(left: SSExpression, right: SSExpression) -> SSExpression:
    return SSExpression("diff", children=(left, right))


def _cells_rec(expr: SSExpression, path: str) -> frozenset:
    if expr.op == "leaf":
        return expr.cube.cube_union().cells
    if expr.op == "union":
        parts = [
            _cells_rec(ch, f"{path}.union[{i}]") for i, ch in enumerate(expr.children)
        ]
        total = sum(len(p) for p in parts)
        merged = frozenset().union(*parts)
        if len(merged) != total:
            raise StructuralError(f"overlapping operands at union node {path}")
        return merged
    left = _cells_rec(expr.children[0], f"{path}.diff.left")
    right = _cells_rec(expr.children[1], f"{path}.diff.right")
    if not right <= left:
        raise StructuralError(f"subtrahend not contained in minuend at node {path}")
    return left - right


def ss_cells(expr: SSExpression) -> CubeUnion:
    """Evaluate an expression to its exact cell set, verifying structure.

    Raises StructuralError naming the offending node on a union overlap, a
    non-contained difference, or a dyadic cube used more than once.
    """
    seen = {}
    for cube in expr.leaves():
        key = (cube.k, cube.corner)
        if key in seen:
            raise StructuralError(f"dyadic cube {key} used more than once in expression")
        seen[key] = True
    cells = _cells_rec(expr, "root")
    d = expr.cube.d if expr.op == "leaf" else next(iter(expr.leaves())).d
    return CubeUnion(cells, d=d)


def ss_evaluate(expr: SSExpression, w) -> float:
    """Evaluate a weight down the tree (union -> sum, diff -> subtraction).

    ``w`` is either a callable taking a DyadicCube or an object exposing
    ``evaluate`` (a weight distribution). The tree is structurally verified
    first so an exactly additive weight is evaluated exactly.
    """
    ss_cells(expr)
    evaluate = w if callable(w) else w.evaluate

    def rec(node):
        if node.op == "leaf":
            return float(evaluate(node.cube))
        if node.op == "union":
            return sum(rec(ch) for ch in node.children)
        return rec(node.children[0]) - rec(node.children[1])

    return rec(expr)


def ss_discrepancy_bound(expr: SSExpression, w, rho: float) -> float:
    """Sum over the leaves of |w(cube) - rho * vol(cube)|.

    This dominates |w(U) - rho * vol(U)| for any exactly additive weight and
    any expression evaluating to U, whatever the signs in the tree.
    """
    evaluate = w if callable(w) else w.evaluate
    total = 0.0
    for cube in expr.leaves():
        total += abs(float(evaluate(cube)) - rho * cube.volume)
    return total


def rasterize(boxes) -> CubeUnion:
    """Unit cells with positive-measure overlap with a box or union of boxes.

    A cell [a, a+1)^d is included iff the closed box meets its interior on a
    set of positive volume: max(lo_i, a_i) < min(hi_i, a_i + 1) per coordinate.
    Touching along a face does not count.
    """
    if isinstance(boxes, Box):
        boxes = [boxes]
    boxes = list(boxes)
    if not boxes:
        raise InvalidInputError("rasterize requires at least one box")
    d = boxes[0].d
    cells: set[tuple[int, ...]] = set()
    for box in boxes:
        if box.d != d:
            raise InvalidInputError("mixed dimensions in rasterize input")
        axes = []
        for lo, hi in zip(box.lo, box.hi):
            a0 = math.floor(lo)
            a1 = math.ceil(hi) - 1
            axes.append([a for a in range(a0, a1 + 1) if max(lo, a) < min(hi, a + 1)])
        for cell in itertools.product(*axes):
            cells.add(cell)
    if not cells:
        raise InvalidInputError("region rasterizes to no cells")
    return CubeUnion(cells, d=d)


def _clip_polygon_halfplane(poly, axis: int, bound: Fraction, keep_leq: bool):
    """Sutherland-Hodgman clip against {x_axis <= bound} (or >=), exact."""
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        p_in = (p[axis] <= bound) if keep_leq else (p[axis] >= bound)
        q_in = (q[axis] <= bound) if keep_leq else (q[axis] >= bound)
        if p_in:
            out.append(p)
        if p_in != q_in:
            t = (bound - p[axis]) / (q[axis] - p[axis])
            out.append(tuple(p[j] + t * (q[j] - p[j]) for j in range(2)))
    return out


def _polygon_area2(poly) -> Fraction:
    """Twice the absolute shoelace area, exact over Fractions."""
    total = Fraction(0)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return abs(total)


def rasterize_polygon(vertices) -> CubeUnion:
    """Unit cells overlapping a simple polygon with rational vertices (d = 2).

    Coordinates may be ints, Fractions or strings like "p/q"; the overlap test
    (clipped area > 0) is exact rational arithmetic, so measure-zero touching
    is excluded exactly.
    """
    poly = []
    for v in vertices:
        if len(v) != 2:
            raise InvalidInputError("polygon vertices must be 2-dimensional")
        poly.append((Fraction(v[0]), Fraction(v[1])))
    if len(poly) < 3:
        raise InvalidInputError("polygon needs at least 3 vertices")
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    cells = set()
    for ax in range(math.floor(min(xs)), math.ceil(max(xs))):
        for ay in range(math.floor(min(ys)), math.ceil(max(ys))):
            clipped = poly
            clipped = _clip_polygon_halfplane(clipped, 0, Fraction(ax), keep_leq=False)
            if len(clipped) >= 3:
                clipped = _clip_polygon_halfplane(clipped, 0, Fraction(ax + 1), keep_leq=True)
            if len(clipped) >= 3:
                clipped = _clip_polygon_halfplane(clipped, 1, Fraction(ay), keep_leq=False)
            if len(clipped) >= 3:
                clipped = _clip_polygon_halfplane(clipped, 1, Fraction(ay + 1), keep_leq=True)
            if len(clipped) >= 3 and _polygon_area2(clipped) > 0:
                cells.add((ax, ay))
    if not cells:
        raise InvalidInputError("polygon rasterizes to no cells")
    return CubeUnion(cells, d=2)


@dataclass
class DecompositionResult:
    expression: SSExpression
    leaves: list[DyadicCube]
    per_scale_counts: dict[int, int]
    area: int
    c_measured: float

    def scales_csv_rows(self) -> list[tuple[int, int, float]]:
        """(k, count, count * 2^(k(d-1)) / area) per scale, ascending k."""
        d = self.leaves[0].d
        rows = []
        for k in sorted(self.per_scale_counts):
            n = self.per_scale_counts[k]
            rows.append((k, n, n * (2 ** (k * (d - 1))) / self.area))
        return rows


def _cells_in_cube(cells: np.ndarray, cube: DyadicCube) -> np.ndarray:
    corner = np.array(cube.corner, dtype=np.int64)
    mask = np.logical_and(cells >= corner, cells < corner + cube.side).all(axis=1)
    return cells[mask]


def _decompose_rec(cells: np.ndarray, cube: DyadicCube, leaves: list) -> SSExpression | None:
    n_in = cells.shape[0]
    if n_in == 0:
        return None
    vol = cube.volume
    if n_in == vol:
        leaves.append(cube)
        return ss_leaf(cube)
    if 2 * n_in > vol:
        # Majority cube: emit whole, subtract the decomposed complement.
        inside = {tuple(row) for row in cells}
        comp = np.array(
            [c for c in itertools.product(*[range(x, x + cube.side) for x in cube.corner])
             if c not in inside],
            dtype=np.int64,
        )
        leaves.append(cube)
        return ss_diff(ss_leaf(cube), _decompose_within(comp, cube, leaves))
    parts = []
    for child in cube.children():
        sub = _decompose_rec(_cells_in_cube(cells, child), child, leaves)
        if sub is not None:
            parts.append(sub)
    return ss_union(*parts)


def _decompose_within(cells: np.ndarray, cube: DyadicCube, leaves: list) -> SSExpression:
    """Decompose a strict-minority cell set inside ``cube`` via its children."""
    parts = []
    for child in cube.children():
        sub = _decompose_rec(_cells_in_cube(cells, child), child, leaves)
        if sub is not None:
            parts.append(sub)
    return ss_union(*parts)


def dyadic_decompose(union: CubeUnion, cube: DyadicCube) -> DecompositionResult:
    """Decompose a cube union into single-use dyadic cube leaves inside ``cube``.

    Preconditions: every cell of the union lies in the cube and
    vol(U) <= vol(B)/2. The result's expression evaluates exactly to the
    union; per-scale leaf counts and the measured surface-area constant
    max_k count_k * 2^(k(d-1)) / area(U) are reported.
    """
    if union.volume == 0:
        raise InvalidInputError("cannot decompose an empty cube union")
    if union.d != cube.d:
        raise InvalidInputError("dimension mismatch between union and cube")
    cells = union.as_array()
    corner = np.array(cube.corner, dtype=np.int64)
    if not np.logical_and(cells >= corner, cells < corner + cube.side).all():
        raise InvalidInputError("cube union is not contained in the given dyadic cube")
    if 2 * union.volume > cube.volume:
        raise InvalidInputError("precondition vol(U)<=vol(B)/2 violated")
    leaves: list[DyadicCube] = []
    expr = _decompose_rec(cells, cube, leaves)
    per_scale: dict[int, int] = {}
    for leaf in leaves:
        per_scale[leaf.k] = per_scale.get(leaf.k, 0) + 1
    area = union.area
    c_measured = max(
        n * (2 ** (k * (union.d - 1))) / area for k, n in per_scale.items()
    )
    return DecompositionResult(expr, leaves, per_scale, area, c_measured)


def smallest_enclosing_dyadic(union: CubeUnion) -> DyadicCube:
    """The smallest dyadic cube containing the union (alignment included)."""
    lo, hi = union.bbox()
    extent = int((hi - lo).max())
    k = max(0, math.ceil(math.log2(extent))) if extent > 1 else 0
    while True:
        side = 1 << k
        corner = tuple(int(side * math.floor(l / side)) for l in lo)
        if all(c + side >= h for c, h in zip(corner, hi)):
            return DyadicCube(k, corner)
        k += 1


@dataclass
class UCDiscrepancyResult:
    lhs: float
    rhs: float
    cube_used: DyadicCube
    beta_fit: float

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "cube_used": self.cube_used.to_json(),
            "beta_fit": self.beta_fit,
        }


def uc_discrepancy_check(pointset, union: CubeUnion, mu: float, delta: float,
                         beta: float | None = None) -> UCDiscrepancyResult:
    """Compare |N(U) - mu vol(U)| against beta * side(B)^(1-delta) * area(U).

    B is the smallest enclosing dyadic cube of U, doubled once (its dyadic
    parent), which guarantees vol(U) <= vol(B)/2. With beta omitted, the rhs
    is reported at the fitted beta, making lhs == rhs.
    """
    if not (0.0 < delta < 1.0):
        raise InvalidInputError("delta must lie in (0, 1)")
    if mu < 0:
        raise InvalidInputError("mu must be nonnegative")
    inner = smallest_enclosing_dyadic(union)
    parent_side = inner.side * 2
    corner = tuple(int(parent_side * math.floor(c / parent_side)) for c in inner.corner)
    cube_used = DyadicCube(inner.k + 1, corner)
    count = pointset.count(union)
    lhs = abs(float(count) - mu * union.volume)
    denom = (cube_used.side ** (1.0 - delta)) * union.area
    beta_fit = lhs / denom
    rhs = (beta if beta is not None else beta_fit) * denom
    return UCDiscrepancyResult(lhs, rhs, cube_used, beta_fit)
