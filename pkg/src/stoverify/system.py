"""Switched stochastic system model and its file loader.

A system couples polynomial mode dynamics dx = f_m dt + g_m dW on a compact
box with a region labeling of the state space and a finite-trace formula over
the region propositions. Region checks that cannot be decided symbolically
(disjointness, boundedness) are sampled on grids and documented as such.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AlphabetTooLargeError,
    BadRateMatrixError,
    DimensionMismatchError,
    MissingModeError,
    MissingRatesError,
    OutOfStateSpaceError,
    OverlappingRegionsError,
    PolySyntaxError,
    SchemaError,
    UnboundedRegionError,
    UnknownPropositionError,
)
from .ltl import Formula, atoms, parse_formula
from .poly import Poly, parse_poly
from .predicates import AndPred, NotPred, OrPred, Pred, PolyLeq, grid_points

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED = {"G", "F", "U", "X", "true"}

MAX_ALPHABET = 16


@dataclass(frozen=True)
class Region:
    prop: str
    pred: Pred
    is_complement: bool = False


@dataclass(frozen=True)
class Mode:
    id: str
    drift: Tuple[Poly, ...]
    diffusion: Tuple[Tuple[Poly, ...], ...]

    @property
    def noise_dim(self) -> int:
        return len(self.diffusion[0]) if self.diffusion else 0


class SwitchedSystem:
    def __init__(
        self,
        *,
        dim: int,
        noise_dim: int,
        lower: Sequence[float],
        upper: Sequence[float],
        horizon: float,
        formula: Formula,
        formula_text: str,
        modes: Sequence[Mode],
        regions: Sequence[Region],
        rates: Optional[Tuple[Tuple[Poly, ...], ...]] = None,
        name: str = "",
    ):
        self.name = name
        self.dim = dim
        self.noise_dim = noise_dim
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self.horizon = float(horizon)
        self.formula = formula
        self.formula_text = formula_text
        self.modes = tuple(modes)
        self.regions = tuple(regions)
        self.rates = rates
        self._mode_index = {m.id: i for i, m in enumerate(self.modes)}
        self._region_index = {r.prop: i for i, r in enumerate(self.regions)}

    # -- lookups ------------------------------------------------------------

    @property
    def alphabet(self) -> Tuple[str, ...]:
        """Propositions in labeling priority order, complement last."""
        return tuple(r.prop for r in self.regions)

    @property
    def mode_ids(self) -> Tuple[str, ...]:
        return tuple(m.id for m in self.modes)

    def mode(self, mode_id: str) -> Mode:
        try:
            return self.modes[self._mode_index[mode_id]]
        except KeyError:
            raise MissingModeError(
                f"unknown mode {mode_id!r}; declared: {', '.join(self.mode_ids)}"
            ) from None

    def mode_index(self, mode_id: str) -> int:
        self.mode(mode_id)
        return self._mode_index[mode_id]

    def require_rates(self) -> Tuple[Tuple[Poly, ...], ...]:
        if self.rates is None:
            raise MissingRatesError(
                "this operation needs the transition-rate matrix, "
                "but the system declares none"
            )
        return self.rates

    def region_of(self, props: Iterable[str]) -> Pred:
        """Union of the named regions, for barrier source/target sets."""
        names = sorted(set(props))
        if not names:
            raise UnknownPropositionError("empty proposition set")
        preds = []
        for p in names:
            if p not in self._region_index:
                raise UnknownPropositionError(
                    f"unknown proposition {p!r}; alphabet: {', '.join(self.alphabet)}"
                )
            preds.append(self.regions[self._region_index[p]].pred)
        return preds[0] if len(preds) == 1 else OrPred(tuple(preds))

    # -- labeling -------------------------------------------------------------

    def in_box(self, X: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        pad = slack * np.maximum(1.0, np.abs(self.upper - self.lower))
        return np.all((X >= self.lower - pad) & (X <= self.upper + pad), axis=1)

    def label_codes(self, X: np.ndarray) -> np.ndarray:
        """Region index per row; declaration order breaks ties, complement catches."""
        X = np.asarray(X, dtype=np.float64)
        inside = self.in_box(X)
        if not inside.all():
            bad = X[~inside][0]
            raise OutOfStateSpaceError(
                f"state {bad.tolist()} lies outside the state-space box"
            )
        codes = np.full(X.shape[0], len(self.regions) - 1, dtype=np.int64)
        claimed = np.zeros(X.shape[0], dtype=bool)
        for i, region in enumerate(self.regions):
            if region.is_complement:
                continue
            mask = ~claimed & region.pred.contains_batch(X)
            codes[mask] = i
            claimed |= mask
        return codes

    def label(self, x) -> str:
        code = self.label_codes(np.asarray(x, dtype=np.float64)[None, :])[0]
        return self.regions[code].prop

    def rates_batch(self, X: np.ndarray) -> np.ndarray:
        """Rate matrix at each state: (N, M, M) array."""
        rates = self.require_rates()
        n = X.shape[0]
        m = len(self.modes)
        out = np.empty((n, m, m), dtype=np.float64)
        for i in range(m):
            for j in range(m):
                out[:, i, j] = rates[i][j].eval_batch(X)
        return out


# -- document loading ----------------------------------------------------------

_TOP_KEYS = {
    "name",
    "dimension",
    "noise_dimension",
    "state_space",
    "horizon",
    "formula",
    "modes",
    "regions",
    "complement_prop",
    "rates",
}


def _require(doc: dict, key: str):
    if key not in doc:
        raise SchemaError(f"missing field {key!r}")
    return doc[key]


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{what} must be a number, got {type(value).__name__}")
    v = float(value)
    if not np.isfinite(v):
        raise SchemaError(f"{what} must be finite")
    return v


def _poly_entry(value, dim: int, what: str) -> Poly:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise SchemaError(f"{what} must be a polynomial string or number")
    text = value if isinstance(value, str) else repr(value)
    try:
        return parse_poly(text, dim)
    except PolySyntaxError as exc:
        if "out of range for dimension" in str(exc):
            raise DimensionMismatchError(f"{what}: {exc}") from None
        raise PolySyntaxError(f"{what}: {exc}") from None


def _prop_name(value, what: str) -> str:
    if not isinstance(value, str) or not _IDENT.match(value):
        raise SchemaError(f"{what} must be an identifier, got {value!r}")
    if value in _RESERVED:
        raise SchemaError(f"{what} {value!r} collides with a formula keyword")
    return value


def _check_resolution(dim: int, requested: int) -> int:
    cap = max(2, int(round(200_000 ** (1.0 / dim))))
    return max(2, min(requested, cap))


def _shifted_interior(pred: Pred, shift: float) -> Pred:
    """Under-approximate the interior by tightening every poly inequality."""
    if isinstance(pred, PolyLeq):
        return PolyLeq(pred.poly + Poly.constant(shift, pred.poly.nvars))
    if isinstance(pred, AndPred):
        return AndPred(tuple(_shifted_interior(p, shift) for p in pred.parts))
    return pred


def system_from_document(doc: dict, *, grid_resolution: int = 33) -> SwitchedSystem:
    """Validate a parsed system document and build the model.

    Disjointness and boundedness of regions are checked by grid sampling at
    the given per-axis resolution (capped so the point count stays moderate).
    """
    if not isinstance(doc, dict):
        raise SchemaError("system document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"unknown field(s): {', '.join(sorted(unknown))}")

    dim = _require(doc, "dimension")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise SchemaError("dimension must be a positive integer")
    noise_dim = _require(doc, "noise_dimension")
    if isinstance(noise_dim, bool) or not isinstance(noise_dim, int) or noise_dim < 0:
        raise SchemaError("noise_dimension must be a nonnegative integer")

    box = _require(doc, "state_space")
    if not isinstance(box, dict) or set(box) != {"lower", "upper"}:
        raise SchemaError("state_space must be an object with 'lower' and 'upper'")
    lower = [_number(v, "state_space.lower entry") for v in box["lower"]]
    upper = [_number(v, "state_space.upper entry") for v in box["upper"]]
    if len(lower) != dim or len(upper) != dim:
        raise DimensionMismatchError(
            f"state_space bounds have length {len(lower)}/{len(upper)}, expected {dim}"
        )
    if any(l >= u for l, u in zip(lower, upper)):
        raise SchemaError("state_space must have lower < upper on every axis")

    horizon = _number(_require(doc, "horizon"), "horizon")
    if horizon <= 0:
        raise SchemaError("horizon must be positive")

    raw_modes = _require(doc, "modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise SchemaError("modes must be a nonempty list")
    modes: List[Mode] = []
    for k, rm in enumerate(raw_modes):
        if not isinstance(rm, dict):
            raise SchemaError(f"modes[{k}] must be an object")
        unknown = set(rm) - {"id", "drift", "diffusion"}
        if unknown:
            raise SchemaError(f"modes[{k}] unknown field(s): {', '.join(sorted(unknown))}")
        mid = _require(rm, "id") if "id" in rm else None
        if not isinstance(mid, str) or not mid:
            raise SchemaError(f"modes[{k}] needs a nonempty string id")
        drift_raw = rm.get("drift")
        if not isinstance(drift_raw, list):
            raise SchemaError(f"mode {mid!r} needs a drift list")
        if len(drift_raw) != dim:
            raise DimensionMismatchError(
                f"mode {mid!r} drift has {len(drift_raw)} entries, expected {dim}"
            )
        drift = tuple(
            _poly_entry(v, dim, f"mode {mid!r} drift[{i}]") for i, v in enumerate(drift_raw)
        )
        diff_raw = rm.get("diffusion")
        if noise_dim == 0:
            if diff_raw not in (None, []):
                raise DimensionMismatchError(
                    f"mode {mid!r} declares diffusion but noise_dimension is 0"
                )
            diffusion = tuple(() for _ in range(dim))
        else:
            if not isinstance(diff_raw, list) or len(diff_raw) != dim:
                raise DimensionMismatchError(
                    f"mode {mid!r} diffusion must have {dim} rows"
                )
            rows = []
            for i, row in enumerate(diff_raw):
                if not isinstance(row, list) or len(row) != noise_dim:
                    raise DimensionMismatchError(
                        f"mode {mid!r} diffusion row {i} must have {noise_dim} entries"
                    )
                rows.append(
                    tuple(
                        _poly_entry(v, dim, f"mode {mid!r} diffusion[{i}][{j}]")
                        for j, v in enumerate(row)
                    )
                )
            diffusion = tuple(rows)
        modes.append(Mode(id=mid, drift=drift, diffusion=diffusion))
    ids = [m.id for m in modes]
    if len(set(ids)) != len(ids):
        raise SchemaError("mode ids must be unique")

    raw_regions = _require(doc, "regions")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise SchemaError("regions must be a nonempty list")
    comp_prop = _prop_name(_require(doc, "complement_prop"), "complement_prop")
    named_preds: List[Tuple[str, Pred]] = []
    for k, rr in enumerate(raw_regions):
        if not isinstance(rr, dict):
            raise SchemaError(f"regions[{k}] must be an object")
        unknown = set(rr) - {"prop", "inequalities"}
        if unknown:
            raise SchemaError(f"regions[{k}] unknown field(s): {', '.join(sorted(unknown))}")
        prop = _prop_name(rr.get("prop"), f"regions[{k}].prop")
        ineqs = rr.get("inequalities")
        if not isinstance(ineqs, list) or not ineqs:
            raise SchemaError(f"region {prop!r} needs a nonempty inequalities list")
        polys = [
            _poly_entry(v, dim, f"region {prop!r} inequalities[{i}]")
            for i, v in enumerate(ineqs)
        ]
        pred = PolyLeq(polys[0]) if len(polys) == 1 else AndPred(
            tuple(PolyLeq(p) for p in polys)
        )
        named_preds.append((prop, pred))
    props = [p for p, _ in named_preds]
    if len(set(props)) != len(props):
        raise SchemaError("region propositions must be unique")
    if comp_prop in props:
        raise SchemaError(f"complement_prop {comp_prop!r} also declared as a region")
    if len(props) + 1 > MAX_ALPHABET:
        raise AlphabetTooLargeError(
            f"{len(props) + 1} propositions exceed the supported maximum {MAX_ALPHABET}"
        )
    comp_pred = NotPred(
        named_preds[0][1]
        if len(named_preds) == 1
        else OrPred(tuple(p for _, p in named_preds))
    )
    regions = tuple(
        [Region(p, pred) for p, pred in named_preds]
        + [Region(comp_prop, comp_pred, is_complement=True)]
    )

    rates: Optional[Tuple[Tuple[Poly, ...], ...]] = None
    if doc.get("rates") is not None:
        raw_rates = doc["rates"]
        m = len(modes)
        if not isinstance(raw_rates, list) or len(raw_rates) != m:
            raise DimensionMismatchError(f"rates must be a {m}x{m} matrix")
        rows = []
        for i, row in enumerate(raw_rates):
            if not isinstance(row, list) or len(row) != m:
                raise DimensionMismatchError(f"rates row {i} must have {m} entries")
            rows.append(
                tuple(_poly_entry(v, dim, f"rates[{i}][{j}]") for j, v in enumerate(row))
            )
        rates = tuple(rows)

    formula_text = _require(doc, "formula")
    if not isinstance(formula_text, str):
        raise SchemaError("formula must be a string")
    formula = parse_formula(formula_text)
    alphabet = tuple(r.prop for r in regions)
    missing = sorted(atoms(formula) - set(alphabet))
    if missing:
        raise UnknownPropositionError(
            f"formula uses undeclared proposition(s): {', '.join(missing)}"
        )

    system = SwitchedSystem(
        dim=dim,
        noise_dim=noise_dim,
        lower=lower,
        upper=upper,
        horizon=horizon,
        formula=formula,
        formula_text=formula_text,
        modes=modes,
        regions=regions,
        rates=rates,
        name=str(doc.get("name", "")),
    )
    _check_rates(system, grid_resolution)
    _check_bounded(system, grid_resolution)
    _check_disjoint(system, grid_resolution)
    return system


def _check_rates(system: SwitchedSystem, resolution: int):
    if system.rates is None:
        return
    m = len(system.modes)
    zero = Poly.zero(system.dim)
    for i in range(m):
        total = zero
        for j in range(m):
            total = total + system.rates[i][j]
        if not total.is_zero():
            raise BadRateMatrixError(f"rates row {i} must sum to zero identically")
    res = _check_resolution(system.dim, resolution)
    pts = grid_points(system.lower, system.upper, res)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            entry = system.rates[i][j]
            if entry.is_constant():
                if entry.constant_value() < 0:
                    raise BadRateMatrixError(f"rates[{i}][{j}] is negative")
            else:
                vals = entry.eval_batch(pts)
                if vals.min() < -1e-9:
                    k = int(vals.argmin())
                    raise BadRateMatrixError(
                        f"rates[{i}][{j}] is negative at x={pts[k].tolist()}"
                    )


def _check_bounded(system: SwitchedSystem, resolution: int):
    """Sampled boundedness check: a region holding far-field points is rejected."""
    center = 0.5 * (system.lower + system.upper)
    halfw = 0.5 * (system.upper - system.lower)
    res = _check_resolution(system.dim, max(resolution, 9))
    outer = grid_points(center - 4 * halfw, center + 4 * halfw, res)
    far = ~np.all(np.abs(outer - center) <= 2 * halfw, axis=1)
    shell = outer[far]
    for region in system.regions:
        if region.is_complement:
            continue
        if region.pred.contains_batch(shell).any():
            raise UnboundedRegionError(
                f"region {region.prop!r} reaches far outside the state space; "
                "non-complement regions must be bounded"
            )


def _check_disjoint(system: SwitchedSystem, resolution: int):
    """Sampled pairwise-disjointness check on region interiors."""
    res = _check_resolution(system.dim, resolution)
    pts = grid_points(system.lower, system.upper, res)
    scale = float(np.max(system.upper - system.lower))
    shift = 1e-9 * max(1.0, scale)
    inner = [
        (r.prop, _shifted_interior(r.pred, shift).contains_batch(pts))
        for r in system.regions
        if not r.is_complement
    ]
    for a in range(len(inner)):
        for b in range(a + 1, len(inner)):
            both = inner[a][1] & inner[b][1]
            if both.any():
                k = int(np.flatnonzero(both)[0])
                raise OverlappingRegionsError(
                    f"regions {inner[a][0]!r} and {inner[b][0]!r} overlap "
                    f"near x={pts[k].tolist()}"
                )


def load_system(path: str, *, grid_resolution: int = 33) -> SwitchedSystem:
    """Read and validate a system file (JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read system file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"system file is not valid JSON: {exc}") from None
    return system_from_document(doc, grid_resolution=grid_resolution)
