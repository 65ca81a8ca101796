"""Multivariate polynomials with exact rational coefficients.

Coefficients are `fractions.Fraction` throughout; floating point only enters
at evaluation sites (`eval_point`, `eval_batch`) and in the interval bounds
used by the grid verifier. Variables are named x1..xn.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PolySyntaxError

Exponents = tuple  # tuple[int, ...]


def _normalize(terms: Mapping[Exponents, Fraction]) -> dict:
    return {e: c for e, c in terms.items() if c != 0}


class Poly:
    """Immutable polynomial in nvars variables over the rationals."""

    __slots__ = ("nvars", "_terms", "_hash", "_arrays")

    def __init__(self, nvars: int, terms: Mapping[Exponents, Fraction] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be >= 1")
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "_terms", _normalize(terms or {}))
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_arrays", None)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars)

    @classmethod
    def constant(cls, value, nvars: int) -> "Poly":
        return cls(nvars, {(0,) * nvars: Fraction(value)})

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Poly":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range")
        e = [0] * nvars
        e[index] = 1
        return cls(nvars, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, exponents: Sequence[int], nvars: int, coeff=1) -> "Poly":
        if len(exponents) != nvars:
            raise ValueError("exponent tuple length mismatch")
        return cls(nvars, {tuple(int(e) for e in exponents): Fraction(coeff)})

    # -- basic queries -------------------------------------------------------

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def total_degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(e) for e in self._terms)

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("mixed dimensions")
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.constant(other, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Poly(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return Poly(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        out = Poly.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def diff(self, axis: int) -> "Poly":
        terms: dict = {}
        for e, c in self._terms.items():
            if e[axis] == 0:
                continue
            de = list(e)
            de[axis] -= 1
            terms[tuple(de)] = c * e[axis]
        return Poly(self.nvars, terms)

    # -- evaluation ----------------------------------------------------------

    def eval_exact(self, point: Sequence) -> Fraction:
        if len(point) != self.nvars:
            raise ValueError("point dimension mismatch")
        pt = [Fraction(v) for v in point]
        total = Fraction(0)
        for e, c in self._terms.items():
            v = c
            for x, k in zip(pt, e):
                if k:
                    v *= x**k
            total += v
        return total

    def _compiled(self):
        arrays = self._arrays
        if arrays is None:
            if self._terms:
                items = sorted(self._terms.items())
                exps = np.array([e for e, _ in items], dtype=np.int64)
                coeffs = np.array([float(c) for _, c in items], dtype=np.float64)
            else:
                exps = np.zeros((0, self.nvars), dtype=np.int64)
                coeffs = np.zeros(0, dtype=np.float64)
            arrays = (exps, coeffs)
            object.__setattr__(self, "_arrays", arrays)
        return arrays

    def eval_point(self, x: Sequence[float]) -> float:
        total = 0.0
        for e, c in self._terms.items():
            v = float(c)
            for xi, k in zip(x, e):
                if k:
                    v *= float(xi) ** k
            total += v
        return total

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on an (N, nvars) array, returning (N,) floats."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError("expected an (N, nvars) array")
        exps, coeffs = self._compiled()
        if coeffs.size == 0:
            return np.zeros(X.shape[0])
        if self.is_constant():
            return np.full(X.shape[0], float(self.constant_value()))
        monos = np.prod(X[:, None, :] ** exps[None, :, :], axis=2)
        return monos @ coeffs

    # -- identity ------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.nvars, frozenset(self._terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"Poly({self!s})"

    def __str__(self):
        if not self._terms:
            return "0"
        items = sorted(
            self._terms.items(), key=lambda ec: (-sum(ec[0]), tuple(-k for k in ec[0]))
        )
        pieces = []
        for i, (e, c) in enumerate(items):
            mono = "*".join(
                f"x{j + 1}" + (f"^{k}" if k > 1 else "")
                for j, k in enumerate(e)
                if k > 0
            )
            mag = abs(c)
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{_frac_str(mag)}*{mono}"
            else:
                body = _frac_str(mag)
            if i == 0:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"(\d+\.\d*|\.\d+|\d+)|(x\d+)|([()+\-*/^])|(\S)")


def _tokenize(text: str):
    tokens = []
    for m in _TOKEN.finditer(text):
        if m.group(4):
            raise PolySyntaxError(f"unexpected character {m.group(4)!r} at {m.start()}")
        if m.group(1):
            tokens.append(("num", m.group(1), m.start()))
        elif m.group(2):
            tokens.append(("var", m.group(2), m.start()))
        else:
            tokens.append(("op", m.group(3), m.start()))
    return tokens


class _PolyParser:
    def __init__(self, text: str, nvars: int):
        self.text = text
        self.nvars = nvars
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok is None:
            raise PolySyntaxError(f"unexpected end of expression: {self.text!r}")
        if kind and tok[0] != kind or value and tok[1] != value:
            raise PolySyntaxError(f"unexpected token {tok[1]!r} at {tok[2]}")
        self.pos += 1
        return tok

    def parse(self) -> Poly:
        p = self.expr()
        if self.peek() is not None:
            tok = self.peek()
            raise PolySyntaxError(f"unexpected token {tok[1]!r} at {tok[2]}")
        return p

    def expr(self) -> Poly:
        p = self.term()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "+-":
            self.take()
            q = self.term()
            p = p + q if tok[1] == "+" else p - q
        return p

    def term(self) -> Poly:
        p = self.factor()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] == "*":
            self.take()
            p = p * self.factor()
        return p

    def factor(self) -> Poly:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.take()
            return -self.factor()
        return self.atom()

    def atom(self) -> Poly:
        tok = self.take()
        if tok[0] == "num":
            value = Fraction(tok[1])
            nxt = self.peek()
            if nxt and nxt[0] == "op" and nxt[1] == "/":
                self.take()
                denom = Fraction(self.take("num")[1])
                if denom == 0:
                    raise PolySyntaxError(f"zero denominator at {tok[2]}")
                value = value / denom
            p = Poly.constant(value, self.nvars)
        elif tok[0] == "var":
            index = int(tok[1][1:]) - 1
            if not 0 <= index < self.nvars:
                raise PolySyntaxError(
                    f"variable {tok[1]} out of range for dimension {self.nvars}"
                )
            p = Poly.variable(index, self.nvars)
        elif tok[0] == "op" and tok[1] == "(":
            p = self.expr()
            self.take("op", ")")
        else:
            raise PolySyntaxError(f"unexpected token {tok[1]!r} at {tok[2]}")
        nxt = self.peek()
        if nxt and nxt[0] == "op" and nxt[1] == "^":
            self.take()
            etok = self.take("num")
            if "." in etok[1]:
                raise PolySyntaxError(f"exponent must be an integer at {etok[2]}")
            p = p ** int(etok[1])
        return p


def parse_poly(text: str, nvars: int) -> Poly:
    """Parse '+ - * ^' polynomial text over variables x1..xn."""
    if not text.strip():
        raise PolySyntaxError("empty polynomial expression")
    return _PolyParser(text, nvars).parse()


# -- interval bounds on box grids ---------------------------------------------

class CellGrid:
    """Uniform partition of a box into cells, with cached interval power tables."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float], cells: Sequence[int]):
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self.cells = tuple(int(c) for c in cells)
        if len(self.cells) != self.lower.size or any(c < 1 for c in self.cells):
            raise ValueError("bad cell counts")
        self.nvars = self.lower.size
        self.edges = [
            np.linspace(self.lower[i], self.upper[i], self.cells[i] + 1)
            for i in range(self.nvars)
        ]
        self.halfwidth = (self.upper - self.lower) / (2 * np.asarray(self.cells))
        self._powers: dict = {}
        self._centers = None

    @property
    def shape(self) -> tuple:
        return self.cells

    def centers_matrix(self) -> np.ndarray:
        """All cell centers as an (N, nvars) array in C order of the cell grid."""
        if self._centers is None:
            axes = [0.5 * (e[:-1] + e[1:]) for e in self.edges]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._centers = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return self._centers

    def cell_center(self, flat_index: int) -> np.ndarray:
        return self.centers_matrix()[flat_index]

    def power_interval(self, axis: int, k: int):
        """Per-cell interval of x^k along one axis: two arrays (lo, hi)."""
        key = (axis, k)
        cached = self._powers.get(key)
        if cached is not None:
            return cached
        lo = self.edges[axis][:-1]
        hi = self.edges[axis][1:]
        if k == 0:
            out = (np.ones_like(lo), np.ones_like(hi))
        elif k % 2 == 1:
            out = (lo**k, hi**k)
        else:
            big = np.maximum(np.abs(lo), np.abs(hi)) ** k
            small = np.minimum(np.abs(lo), np.abs(hi)) ** k
            small = np.where((lo <= 0) & (hi >= 0), 0.0, small)
            out = (small, big)
        self._powers[key] = out
        return out


def _interval_mul(alo, ahi, blo, bhi):
    cands = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return cands.min(axis=0), cands.max(axis=0)


def interval_on_cells(poly: Poly, grid: CellGrid):
    """Rigorous per-cell range bounds: two arrays of shape grid.shape."""
    if poly.nvars != grid.nvars:
        raise ValueError("dimension mismatch")
    total_lo = np.zeros(grid.shape)
    total_hi = np.zeros(grid.shape)
    for e, c in poly._terms.items():
        lo = hi = None
        for axis, k in enumerate(e):
            plo, phi = grid.power_interval(axis, k)
            shape = [1] * grid.nvars
            shape[axis] = -1
            plo = plo.reshape(shape)
            phi = phi.reshape(shape)
            if lo is None:
                lo, hi = np.broadcast_to(plo, grid.shape).copy(), np.broadcast_to(
                    phi, grid.shape
                ).copy()
            else:
                lo, hi = _interval_mul(lo, hi, plo, phi)
        cf = float(c)
        if cf >= 0:
            total_lo += cf * lo
            total_hi += cf * hi
        else:
            total_lo += cf * hi
            total_hi += cf * lo
    return total_lo, total_hi


def inflation_on_cells(poly: Poly, grid: CellGrid) -> np.ndarray:
    """Per-cell bound on |poly(x) - poly(center)|: sum_j halfwidth_j * max|d poly/dx_j|."""
    out = np.zeros(grid.shape)
    for axis in range(grid.nvars):
        d = poly.diff(axis)
        if d.is_zero():
            continue
        lo, hi = interval_on_cells(d, grid)
        out += grid.halfwidth[axis] * np.maximum(np.abs(lo), np.abs(hi))
    return out


def bound_abs_on_box(poly: Poly, lower: Sequence[float], upper: Sequence[float]) -> float:
    """Cheap bound on max |poly| over the box (monomial-wise)."""
    mx = [max(abs(float(l)), abs(float(u))) for l, u in zip(lower, upper)]
    total = 0.0
    for e, c in poly._terms.items():
        v = abs(float(c))
        for m, k in zip(mx, e):
            if k:
                v *= m**k
        total += v
    return total


def lipschitz_bound_on_box(poly: Poly, lower, upper) -> float:
    """Bound on the Euclidean gradient norm over the box."""
    sq = 0.0
    for axis in range(poly.nvars):
        b = bound_abs_on_box(poly.diff(axis), lower, upper)
        sq += b * b
    return float(np.sqrt(sq))
