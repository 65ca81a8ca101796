"""Semialgebraic predicates: membership, batch tests, and cell-wise bounds.

A predicate denotes a subset of R^n. The grid machinery gives three-valued
answers per cell (definitely inside / possibly intersecting) so callers can
quantify conservatively over regions without symbolic set arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .errors import SchemaError
from .poly import CellGrid, Poly, interval_on_cells


class Pred:
    nvars: int

    def contains(self, x) -> bool:
        return bool(self.contains_batch(np.asarray(x, dtype=np.float64)[None, :])[0])

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cell_status(self, grid: CellGrid) -> Tuple[np.ndarray, np.ndarray]:
        """(definite, possible): cells fully inside / cells that may intersect."""
        raise NotImplementedError

    def violation_batch(self, X: np.ndarray) -> np.ndarray:
        """Heuristic >= 0 score, zero exactly on members; used for steering."""
        raise NotImplementedError

    def to_smt(self, names: Sequence[str]) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class PolyLeq(Pred):
    """{x : poly(x) <= 0}; the boundary counts as inside."""

    poly: Poly

    @property
    def nvars(self):
        return self.poly.nvars

    def contains_batch(self, X):
        return self.poly.eval_batch(X) <= 0.0

    def cell_status(self, grid):
        lo, hi = interval_on_cells(self.poly, grid)
        return hi <= 0.0, lo <= 0.0

    def violation_batch(self, X):
        return np.maximum(self.poly.eval_batch(X), 0.0)

    def to_smt(self, names):
        return f"(<= {poly_to_smt(self.poly, names)} 0)"


@dataclass(frozen=True)
class BoxPred(Pred):
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        if any(l > u for l, u in zip(self.lower, self.upper)):
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def nvars(self):
        return len(self.lower)

    def contains_batch(self, X):
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((X >= lo) & (X <= hi), axis=1)

    def cell_status(self, grid):
        definite = np.ones(grid.shape, dtype=bool)
        possible = np.ones(grid.shape, dtype=bool)
        for axis in range(grid.nvars):
            clo = grid.edges[axis][:-1]
            chi = grid.edges[axis][1:]
            shape = [1] * grid.nvars
            shape[axis] = -1
            definite &= ((clo >= self.lower[axis]) & (chi <= self.upper[axis])).reshape(shape)
            possible &= ((chi >= self.lower[axis]) & (clo <= self.upper[axis])).reshape(shape)
        return definite, possible

    def violation_batch(self, X):
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.maximum(lo - X, 0.0).sum(axis=1) + np.maximum(X - hi, 0.0).sum(axis=1)

    def to_smt(self, names):
        parts = []
        for i, nm in enumerate(names):
            parts.append(f"(>= {nm} {_smt_number(self.lower[i])})")
            parts.append(f"(<= {nm} {_smt_number(self.upper[i])})")
        return "(and " + " ".join(parts) + ")"


def _common_nvars(parts) -> int:
    dims = {p.nvars for p in parts}
    if len(dims) != 1:
        raise ValueError("mixed-dimension predicates")
    return dims.pop()


@dataclass(frozen=True)
class AndPred(Pred):
    parts: Tuple[Pred, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty conjunction")
        _common_nvars(self.parts)

    @property
    def nvars(self):
        return self.parts[0].nvars

    def contains_batch(self, X):
        out = self.parts[0].contains_batch(X)
        for p in self.parts[1:]:
            out = out & p.contains_batch(X)
        return out

    def cell_status(self, grid):
        definite, possible = self.parts[0].cell_status(grid)
        for p in self.parts[1:]:
            d, m = p.cell_status(grid)
            definite = definite & d
            possible = possible & m
        return definite, possible

    def violation_batch(self, X):
        return sum(p.violation_batch(X) for p in self.parts)

    def to_smt(self, names):
        return "(and " + " ".join(p.to_smt(names) for p in self.parts) + ")"


@dataclass(frozen=True)
class OrPred(Pred):
    parts: Tuple[Pred, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty disjunction")
        _common_nvars(self.parts)

    @property
    def nvars(self):
        return self.parts[0].nvars

    def contains_batch(self, X):
        out = self.parts[0].contains_batch(X)
        for p in self.parts[1:]:
            out = out | p.contains_batch(X)
        return out

    def cell_status(self, grid):
        definite, possible = self.parts[0].cell_status(grid)
        for p in self.parts[1:]:
            d, m = p.cell_status(grid)
            definite = definite | d
            possible = possible | m
        return definite, possible

    def violation_batch(self, X):
        out = self.parts[0].violation_batch(X)
        for p in self.parts[1:]:
            out = np.minimum(out, p.violation_batch(X))
        return out

    def to_smt(self, names):
        return "(or " + " ".join(p.to_smt(names) for p in self.parts) + ")"


@dataclass(frozen=True)
class NotPred(Pred):
    part: Pred

    @property
    def nvars(self):
        return self.part.nvars

    def contains_batch(self, X):
        return ~self.part.contains_batch(X)

    def cell_status(self, grid):
        d, m = self.part.cell_status(grid)
        return ~m, ~d

    def violation_batch(self, X):
        return np.where(self.part.contains_batch(X), 1.0, 0.0)

    def to_smt(self, names):
        return f"(not {self.part.to_smt(names)})"


# -- SMT-LIB text -----------------------------------------------------------------

def _smt_number(v) -> str:
    from fractions import Fraction

    f = Fraction(v).limit_denominator(10**12) if isinstance(v, float) else Fraction(v)
    if f.denominator == 1:
        return str(f.numerator) if f.numerator >= 0 else f"(- {-f.numerator})"
    num = str(f.numerator) if f.numerator >= 0 else f"(- {-f.numerator})"
    return f"(/ {num} {f.denominator})"


def poly_to_smt(poly: Poly, names: Sequence[str]) -> str:
    if len(names) != poly.nvars:
        raise ValueError("one name per variable required")
    terms = []
    for e, c in sorted(poly.terms.items(), key=lambda t: (-sum(t[0]), t[0])):
        factors = [_smt_number(c)]
        for axis, k in enumerate(e):
            factors.extend([names[axis]] * k)
        terms.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    if not terms:
        return "0"
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


# -- point generation ---------------------------------------------------------------

def halton_in_box(lower, upper, n: int, skip: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points in a box, shape (n, d)."""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    gen = qmc.Halton(d=lower.size, scramble=False)
    if skip:
        gen.fast_forward(skip)
    pts = gen.random(n)
    return qmc.scale(pts, lower, upper)


def sample_in_pred(pred: Pred, lower, upper, n: int, max_draw: int = 1 << 22) -> np.ndarray:
    """n low-discrepancy points of the box lying in pred; deterministic."""
    collected = []
    total = 0
    skip = 0
    batch = max(4 * n, 256)
    while total < n:
        if skip >= max_draw:
            raise SchemaError(
                f"found only {total} of {n} points in region after {skip} draws; "
                "the region may be empty or negligibly small inside the state box"
            )
        pts = halton_in_box(lower, upper, batch, skip=skip)
        skip += batch
        keep = pts[pred.contains_batch(pts)]
        if keep.size:
            collected.append(keep)
            total += keep.shape[0]
        batch = min(2 * batch, 1 << 18)
    return np.concatenate(collected, axis=0)[:n]


def grid_points(lower, upper, per_axis: int) -> np.ndarray:
    """Uniform lattice including box corners, shape (per_axis^d, d)."""
    axes = [np.linspace(l, u, per_axis) for l, u in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)
