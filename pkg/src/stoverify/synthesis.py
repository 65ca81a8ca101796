"""Barrier-certificate synthesis for reach bounds.

The search alternates a linear-programming feasibility step on a growing
sample set with a numerical counterexample hunt (grid scan plus local zoom),
then subjects candidates to an independent per-cell interval check with
derivative-based inflation. A certificate is only reported with the gamma and
c values that the cell check itself proves, so the resulting reach bound
min(1, gamma + c*T) never rests on sampled constraints alone.

Verification is "up to grid + interval inflation": intervals are evaluated in
floating point without outward rounding, which is documented in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import OutputWriteError, SchemaError
from .generator import apply_generator
from .poly import CellGrid, Poly, interval_on_cells, inflation_on_cells
from .predicates import Pred, grid_points, halton_in_box, poly_to_smt, sample_in_pred
from .system import SwitchedSystem


@dataclass(frozen=True)
class ReachSpec:
    """Bound the probability of reaching `target` from `source` before `horizon`."""

    source: Pred
    target: Pred
    horizon: float


@dataclass(frozen=True)
class BasisSet:
    """Monomials up to a degree, scaled so each basis function is O(1) on the box."""

    exponents: Tuple[Tuple[int, ...], ...]
    scales: Tuple[Fraction, ...]
    polys: Tuple[Poly, ...]

    def __len__(self):
        return len(self.polys)


def make_basis(lower, upper, degree: int) -> BasisSet:
    if degree < 0:
        raise SchemaError("basis degree must be nonnegative")
    n = len(lower)
    mx = [Fraction(max(abs(float(l)), abs(float(u)))) for l, u in zip(lower, upper)]
    if any(m == 0 for m in mx):
        raise SchemaError("state-space box must have positive extent")
    exps = sorted(
        (e for e in iproduct(range(degree + 1), repeat=n) if sum(e) <= degree),
        key=lambda e: (sum(e), e),
    )
    scales = []
    polys = []
    for e in exps:
        s = Fraction(1)
        for j, k in enumerate(e):
            s *= mx[j] ** k
        scales.append(s)
        polys.append(Poly.monomial(e, n, coeff=Fraction(1) / s))
    return BasisSet(tuple(exps), tuple(scales), tuple(polys))


@dataclass
class CegisConfig:
    initial_samples: int = 64
    max_iters: int = 40
    coeff_bound: float = 64.0
    slack_tol: float = 1e-8
    ce_tol: float = 1e-7
    verify_epsilon: float = 1e-9
    scan_resolution: Optional[int] = None
    verify_cells: Optional[int] = None
    bisect_tol: float = 1e-4
    bisect_cap: int = 20
    c_grid: Optional[Tuple[float, ...]] = None
    zoom_rounds: int = 3
    feedback_cells: int = 8

    def scan_res(self, dim: int) -> int:
        if self.scan_resolution:
            return self.scan_resolution
        return {1: 1025, 2: 65, 3: 17}.get(dim, 7)

    def cells(self, dim: int) -> int:
        if self.verify_cells:
            return self.verify_cells
        return {1: 4096, 2: 128, 3: 24}.get(dim, 8)

    def c_schedule(self) -> Tuple[float, ...]:
        if self.c_grid is not None:
            return self.c_grid
        # geometric sweep 1e-4 .. 1 in half-decade steps, plus the exact zero
        vals = [10 ** (k / 2) for k in range(-8, 1)]
        return (0.0, *vals)


@dataclass(frozen=True)
class Failure:
    reason: str  # "infeasible" or "budget_exhausted"
    detail: str = ""

    @property
    def verified(self) -> bool:
        return False


@dataclass(frozen=True)
class VerifiedCertificate:
    barriers: Tuple[Poly, ...]
    gamma: float  # proven sup of B over the source cells
    c: float      # proven sup of the generator over the box cells
    bound: float  # min(1, gamma + c * horizon)
    gamma_requested: float
    c_requested: float
    verified: bool
    failures: Tuple[Tuple[str, Tuple[float, ...], float], ...] = ()

    @property
    def common(self) -> bool:
        return len(self.barriers) == 1


@dataclass(frozen=True)
class _Sample:
    family: str  # nonneg | source | target | gen
    func: int    # barrier index; for gen rows, the mode index
    x: Tuple[float, ...]
    extra: float = 0.0


class SynthesisProblem:
    """One reach task: system + spec + basis, with cached scan sets."""

    def __init__(
        self,
        system: SwitchedSystem,
        spec: ReachSpec,
        basis: BasisSet,
        multiple: bool = False,
    ):
        self.system = system
        self.spec = spec
        self.basis = basis
        self.multiple = bool(multiple)
        if self.multiple:
            system.require_rates()
        self.n_funcs = len(system.modes) if self.multiple else 1
        self.n_modes = len(system.modes)
        self.dim = system.dim
        self._gen_polys = [
            [apply_generator(p, mode) for p in basis.polys] for mode in system.modes
        ]
        self._scan: Dict[str, np.ndarray] = {}

    # -- point sets -----------------------------------------------------------

    def box_scan(self, res: int) -> np.ndarray:
        key = f"box:{res}"
        if key not in self._scan:
            self._scan[key] = grid_points(self.system.lower, self.system.upper, res)
        return self._scan[key]

    def member_scan(self, which: str, res: int) -> np.ndarray:
        """Scan points inside source/target: box grid + low-discrepancy members."""
        key = f"{which}:{res}"
        if key not in self._scan:
            pred = self.spec.source if which == "source" else self.spec.target
            pools = [self.box_scan(res if res % 2 == 1 else res + 1)]
            pools.append(halton_in_box(self.system.lower, self.system.upper, 4096))
            pts = np.concatenate(pools, axis=0)
            members = pts[pred.contains_batch(pts)]
            try:
                extra = sample_in_pred(
                    pred, self.system.lower, self.system.upper, 64, max_draw=1 << 16
                )
                members = np.concatenate([members, extra], axis=0)
            except SchemaError:
                pass
            self._scan[key] = members
        return self._scan[key]

    def degenerate(self) -> bool:
        """Source touching target makes the reach bound trivially 1."""
        res = 33 if self.dim <= 2 else 9
        src = self.member_scan("source", res)
        if src.size and self.spec.target.contains_batch(src).any():
            return True
        tgt = self.member_scan("target", res)
        return bool(tgt.size and self.spec.source.contains_batch(tgt).any())

    # -- evaluation helpers ------------------------------------------------------

    def basis_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.stack([p.eval_batch(X) for p in self.basis.polys], axis=1)

    def gen_matrix(self, X: np.ndarray, mode_ix: int) -> np.ndarray:
        return np.stack([p.eval_batch(X) for p in self._gen_polys[mode_ix]], axis=1)

    def barrier_poly(self, coeffs: np.ndarray, func: int) -> Poly:
        out = Poly.zero(self.dim)
        for k, p in enumerate(self.basis.polys):
            a = coeffs[func, k]
            if a != 0.0:
                out = out + p * Poly.constant(Fraction(float(a)), self.dim)
        return out

    def generator_exprs(self, barriers: Sequence[Poly]) -> List[Poly]:
        """Exact generator expression per mode, with rate coupling when multiple."""
        out = []
        for m, mode in enumerate(self.system.modes):
            expr = apply_generator(barriers[m if self.multiple else 0], mode)
            if self.multiple:
                rates = self.system.require_rates()
                for mp in range(self.n_modes):
                    term = rates[m][mp] * barriers[mp]
                    if not term.is_zero():
                        expr = expr + term
            out.append(expr)
        return out


def initial_pool(problem: SynthesisProblem, cfg: CegisConfig) -> List[_Sample]:
    k = cfg.initial_samples
    sysm = problem.system
    pool: List[_Sample] = []
    box_pts = halton_in_box(sysm.lower, sysm.upper, k)
    res = cfg.scan_res(problem.dim)
    src = problem.member_scan("source", res)[:k]
    tgt = problem.member_scan("target", res)[:k]
    for f in range(problem.n_funcs):
        pool.extend(_Sample("nonneg", f, tuple(x)) for x in box_pts)
        pool.extend(_Sample("source", f, tuple(x)) for x in src)
        pool.extend(_Sample("target", f, tuple(x)) for x in tgt)
    for m in range(problem.n_modes):
        pool.extend(_Sample("gen", m, tuple(x)) for x in box_pts)
    return pool


# -- LP feasibility ------------------------------------------------------------------

def _gen_rows(problem: SynthesisProblem, X: np.ndarray, m: int) -> np.ndarray:
    """Stacked-coefficient rows of the (coupled) generator inequality at points X."""
    K = len(problem.basis)
    rows = np.zeros((X.shape[0], problem.n_funcs * K))
    if not problem.multiple:
        rows[:, 0:K] = problem.gen_matrix(X, m)
        return rows
    rows[:, m * K : (m + 1) * K] = problem.gen_matrix(X, m)
    phi = problem.basis_matrix(X)
    lam = problem.system.rates_batch(X)
    for mp in range(problem.n_modes):
        rows[:, mp * K : (mp + 1) * K] += lam[:, m, mp, None] * phi
    return rows


def feasibility_solve(
    problem: SynthesisProblem,
    pool: Sequence[_Sample],
    gamma: float,
    c: float,
    cfg: CegisConfig,
) -> Tuple[Optional[np.ndarray], float]:
    """Max-min-slack LP over the sample pool, then an L1 shrink of the coefficients.

    Returns (coeffs of shape (n_funcs, K), slack) or (None, slack) when the pool
    admits no margin above cfg.slack_tol.
    """
    K = len(problem.basis)
    F = problem.n_funcs
    nv = F * K
    rows: List[np.ndarray] = []
    rhs: List[float] = []
    by_family: Dict[Tuple[str, int], List[_Sample]] = {}
    for s in pool:
        by_family.setdefault((s.family, s.func), []).append(s)
    for (family, func), samples in sorted(by_family.items()):
        X = np.array([s.x for s in samples])
        extras = np.array([s.extra for s in samples])
        if family == "gen":
            rows.append(_gen_rows(problem, X, func))
            rhs.append(c - extras)
            continue
        phi = problem.basis_matrix(X)
        block = np.zeros((len(samples), nv))
        if family == "nonneg":
            block[:, func * K : (func + 1) * K] = -phi
            rows.append(block)
            rhs.append(0.0 - extras)
        elif family == "source":
            block[:, func * K : (func + 1) * K] = phi
            rows.append(block)
            rhs.append(gamma - extras)
        elif family == "target":
            block[:, func * K : (func + 1) * K] = -phi
            rows.append(block)
            rhs.append(-1.0 - extras)
    A = np.concatenate(rows, axis=0)
    b = np.concatenate([np.broadcast_to(r, (len(x),)) for r, x in zip(rhs, rows)])
    A_slack = np.concatenate([A, np.ones((A.shape[0], 1))], axis=1)
    cb = cfg.coeff_bound
    bounds = [(-cb, cb)] * nv + [(None, 10.0)]
    obj = np.zeros(nv + 1)
    obj[-1] = -1.0
    res = linprog(obj, A_ub=A_slack, b_ub=b, bounds=bounds, method="highs")
    if not res.success:
        return None, -math.inf
    slack = float(res.x[-1])
    if slack < cfg.slack_tol:
        return None, slack
    coeffs = res.x[:nv]
    # second phase: keep half the margin, shrink |a| to help interval verification
    t_fix = 0.5 * min(slack, 1.0)
    A2 = np.block(
        [
            [A, np.zeros((A.shape[0], nv))],
            [np.eye(nv), -np.eye(nv)],
            [-np.eye(nv), -np.eye(nv)],
        ]
    )
    b2 = np.concatenate([b - t_fix, np.zeros(2 * nv)])
    obj2 = np.concatenate([np.zeros(nv), np.ones(nv)])
    bounds2 = [(-cb, cb)] * nv + [(0.0, None)] * nv
    res2 = linprog(obj2, A_ub=A2, b_ub=b2, bounds=bounds2, method="highs")
    if res2.success:
        coeffs = res2.x[:nv]
        slack = t_fix
    return coeffs.reshape(F, K), slack


# -- counterexample search ---------------------------------------------------------

def _zoom(fval, member, x0, radius, lower, upper, rounds):
    """Local grid refinement of a violation function around x0."""
    best_x = x0
    best_v = fval(x0[None, :])[0]
    r = radius
    for _ in range(rounds):
        axes = [
            np.linspace(
                max(lower[j], best_x[j] - r[j]), min(upper[j], best_x[j] + r[j]), 5
            )
            for j in range(len(lower))
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        if member is not None:
            pts = pts[member.contains_batch(pts)]
            if pts.shape[0] == 0:
                break
        vals = fval(pts)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_v = vals[k]
            best_x = pts[k]
        r = r * 0.4
    return best_x, float(best_v)


def find_counterexample(
    problem: SynthesisProblem,
    coeffs: np.ndarray,
    gamma: float,
    c: float,
    cfg: CegisConfig,
) -> List[Tuple[_Sample, float]]:
    """Worst constraint violation per family; empty when none exceeds cfg.ce_tol."""
    sysm = problem.system
    res = cfg.scan_res(problem.dim)
    Xbox = problem.box_scan(res)
    cell = (sysm.upper - sysm.lower) / max(res - 1, 1)
    out: List[Tuple[_Sample, float]] = []

    def B(f):
        return lambda X: problem.basis_matrix(X) @ coeffs[f]

    def gen(m):
        if not problem.multiple:
            return lambda X: problem.gen_matrix(X, m) @ coeffs[0]

        def val(X):
            v = problem.gen_matrix(X, m) @ coeffs[m]
            lam = sysm.rates_batch(X)
            phi = problem.basis_matrix(X)
            for mp in range(problem.n_modes):
                v = v + lam[:, m, mp] * (phi @ coeffs[mp])
            return v

        return val

    def hunt(family, func, fval, scan, member):
        if scan.shape[0] == 0:
            return
        vals = fval(scan)
        k = int(np.argmax(vals))
        if vals[k] <= cfg.ce_tol:
            return
        x, v = _zoom(fval, member, scan[k], cell, sysm.lower, sysm.upper, cfg.zoom_rounds)
        out.append((_Sample(family, func, tuple(float(t) for t in x)), v))

    for f in range(problem.n_funcs):
        bf = B(f)
        hunt("nonneg", f, lambda X, bf=bf: -bf(X), Xbox, None)
        hunt(
            "source",
            f,
            lambda X, bf=bf: bf(X) - gamma,
            problem.member_scan("source", res),
            problem.spec.source,
        )
        hunt(
            "target",
            f,
            lambda X, bf=bf: 1.0 - bf(X),
            problem.member_scan("target", res),
            problem.spec.target,
        )
    for m in range(problem.n_modes):
        gv = gen(m)
        hunt("gen", m, lambda X, gv=gv: gv(X) - c, Xbox, None)
    return out


# -- rigorous grid verification -------------------------------------------------------

def _cell_bounds(poly: Poly, grid: CellGrid):
    """Per-cell (lower, upper) bounds: interval hull tightened by center+inflation."""
    lo, hi = interval_on_cells(poly, grid)
    infl = inflation_on_cells(poly, grid)
    centers = poly.eval_batch(grid.centers_matrix()).reshape(grid.shape)
    return np.maximum(lo, centers - infl), np.minimum(hi, centers + infl)


def verify_barrier(
    problem: SynthesisProblem,
    barriers: Sequence[Poly],
    gamma: float,
    c: float,
    cfg: Optional[CegisConfig] = None,
    strict: bool = True,
):
    """Certify the candidate on a fresh cell grid and report proven gamma and c.

    With strict=True (the default) the candidate must meet the *requested*
    gamma and c up to cfg.verify_epsilon, and a violation is reported as a
    (constraint, point, margin) failure. With strict=False the proven levels
    replace the requested ones, which is what the synthesis loop uses: the
    certificate it returns is stated at grid-proven values and therefore
    passes a strict re-check against its own gamma and c.

    The target level is renormalized: if min B on the target cells is b1 with
    0 < b1 < 1, B/b1 is the certified function (scaling preserves nonnegativity
    and scales gamma and c alike). Returns a VerifiedCertificate either way.
    """
    cfg = cfg or CegisConfig()
    sysm = problem.system
    grid = CellGrid(
        sysm.lower, sysm.upper, [cfg.cells(problem.dim)] * problem.dim
    )
    centers = grid.centers_matrix()
    eps = cfg.verify_epsilon
    failures: List[Tuple[str, Tuple[float, ...], float]] = []

    src_def, src_pos = problem.spec.source.cell_status(grid)
    tgt_def, tgt_pos = problem.spec.target.cell_status(grid)

    lo_all = []
    hi_all = []
    for f, Bp in enumerate(barriers):
        lo, hi = _cell_bounds(Bp, grid)
        lo_all.append(lo)
        hi_all.append(hi)
        bad = lo < -eps
        if bad.any():
            flat = np.flatnonzero(bad.reshape(-1))
            worst = flat[np.argsort(lo.reshape(-1)[flat])][: cfg.feedback_cells]
            for k in worst:
                failures.append(
                    (f"nonneg[{f}]", tuple(centers[k]), float(-lo.reshape(-1)[k]))
                )

    # proven target level: smallest lower bound of any barrier on target cells
    b1 = math.inf
    for f in range(len(barriers)):
        masked = lo_all[f][tgt_pos]
        if masked.size:
            b1 = min(b1, float(masked.min()))
    if not tgt_pos.any():
        b1 = 1.0  # no cell can intersect the target: nothing to reach
    if b1 <= eps:
        for f in range(len(barriers)):
            flat_mask = tgt_pos.reshape(-1)
            vals = lo_all[f].reshape(-1)
            idx = np.flatnonzero(flat_mask & (vals <= eps))[: cfg.feedback_cells]
            for k in idx:
                failures.append((f"target[{f}]", tuple(centers[k]), float(1 - vals[k])))
        scale = 1.0
    else:
        scale = 1.0 / min(b1, 1.0)

    gamma_proven = 0.0
    gamma_arg = None
    for f in range(len(barriers)):
        masked_ix = np.flatnonzero(src_pos.reshape(-1))
        if masked_ix.size:
            vals = hi_all[f].reshape(-1)[masked_ix] * scale
            k = int(np.argmax(vals))
            if vals[k] > gamma_proven or gamma_arg is None:
                gamma_proven = max(gamma_proven, float(vals[k]))
                gamma_arg = tuple(centers[masked_ix[k]])

    gen_exprs = problem.generator_exprs(list(barriers))
    c_proven = 0.0
    c_arg = tuple(centers[0])
    for m, expr in enumerate(gen_exprs):
        _, ghi = _cell_bounds(expr, grid)
        flat = ghi.reshape(-1) * scale
        k = int(np.argmax(flat))
        if flat[k] > c_proven:
            c_proven = float(flat[k])
            c_arg = tuple(centers[k])
    c_proven = max(c_proven, 0.0)

    if strict:
        if gamma_proven > gamma + eps and gamma_arg is not None:
            failures.append(("source", gamma_arg, gamma_proven - gamma))
        if c_proven > c + eps:
            failures.append(("gen", c_arg, c_proven - c))
    elif gamma_proven > 1.0 + eps and gamma_arg is not None:
        failures.append(("source", gamma_arg, gamma_proven - 1.0))
    verified = not failures
    if scale != 1.0:
        sc = Poly.constant(Fraction(float(scale)), problem.dim)
        barriers = tuple(Bp * sc for Bp in barriers)
    else:
        barriers = tuple(barriers)
    bound = min(1.0, gamma_proven + c_proven * problem.spec.horizon)
    return VerifiedCertificate(
        barriers=barriers,
        gamma=min(gamma_proven, 1.0),
        c=c_proven,
        bound=bound,
        gamma_requested=gamma,
        c_requested=c,
        verified=verified,
        failures=tuple(failures),
    )


# -- the CEGIS loop -------------------------------------------------------------------

def cegis(
    problem: SynthesisProblem,
    gamma: float,
    c: float,
    cfg: Optional[CegisConfig] = None,
    pool: Optional[List[_Sample]] = None,
):
    """Alternate LP feasibility and counterexample search at fixed (gamma, c).

    Returns a VerifiedCertificate or a Failure; the pool (if given) accumulates
    counterexamples across calls, so repeated nearby queries warm-start.
    """
    cfg = cfg or CegisConfig()
    if pool is None:
        pool = initial_pool(problem, cfg)
    elif not pool:
        pool.extend(initial_pool(problem, cfg))
    seen = {(s.family, s.func, s.x) for s in pool}
    for _ in range(cfg.max_iters):
        coeffs, slack = feasibility_solve(problem, pool, gamma, c, cfg)
        if coeffs is None:
            return Failure("infeasible", f"no feasible coefficients (slack {slack:.2e})")
        ces = find_counterexample(problem, coeffs, gamma, c, cfg)
        if not ces:
            barriers = [
                problem.barrier_poly(coeffs, f) for f in range(problem.n_funcs)
            ]
            cert = verify_barrier(problem, barriers, gamma, c, cfg, strict=False)
            if cert.verified:
                return cert
            progressed = False
            for constraint, x, violation in cert.failures:
                family = constraint.split("[")[0]
                func = int(constraint.split("[")[1][:-1]) if "[" in constraint else 0
                if family == "source" and not problem.spec.source.contains(x):
                    continue
                if family == "target" and not problem.spec.target.contains(x):
                    continue
                key = (family, func, x)
                if key not in seen:
                    seen.add(key)
                    pool.append(_Sample(family, func, x, extra=min(violation, 0.1)))
                    progressed = True
            if not progressed:
                return Failure(
                    "budget_exhausted",
                    "grid verification keeps failing on already-sampled cells",
                )
            continue
        progressed = False
        for sample, _violation in ces:
            key = (sample.family, sample.func, sample.x)
            if key not in seen:
                seen.add(key)
                pool.append(sample)
                progressed = True
        if not progressed:
            return Failure("budget_exhausted", "counterexample search stalled")
    return Failure("budget_exhausted", f"no certificate in {cfg.max_iters} iterations")


def cegis_multiple(
    system: SwitchedSystem,
    spec: ReachSpec,
    basis: BasisSet,
    gamma: float,
    c: float,
    cfg: Optional[CegisConfig] = None,
    pool: Optional[List[_Sample]] = None,
):
    """Per-mode barriers coupled through the transition rates."""
    problem = SynthesisProblem(system, spec, basis, multiple=True)
    return cegis(problem, gamma, c, cfg, pool)


def minimize_bound(
    problem: SynthesisProblem, cfg: Optional[CegisConfig] = None
):
    """Sweep c geometrically, bisect gamma at each level, keep the best bound.

    Success requires a verified certificate with bound strictly below 1;
    otherwise the last Failure explains why.
    """
    cfg = cfg or CegisConfig()
    T = problem.spec.horizon
    if problem.degenerate():
        return Failure("infeasible", "source and target sets intersect; bound is 1")
    pool = initial_pool(problem, cfg)
    best = None
    last_failure = Failure("infeasible", "no (gamma, c) level admitted a certificate")
    for c in cfg.c_schedule():
        if best is not None and c * T >= best.bound - 1e-9:
            continue
        gamma_cap = 1.0 if best is None else min(1.0, best.bound - c * T - 1e-6)
        if gamma_cap <= 0:
            continue
        res = cegis(problem, gamma_cap, c, cfg, pool)
        if isinstance(res, Failure):
            last_failure = res
            continue
        level_best = res
        lo, hi = 0.0, gamma_cap
        for _ in range(cfg.bisect_cap):
            if hi - lo <= cfg.bisect_tol:
                break
            mid = 0.5 * (lo + hi)
            r = cegis(problem, mid, c, cfg, pool)
            if isinstance(r, Failure):
                lo = mid
            else:
                hi = mid
                if r.bound < level_best.bound:
                    level_best = r
        if best is None or level_best.bound < best.bound:
            best = level_best
    if best is None:
        return last_failure
    if best.bound >= 1.0 - 1e-9:
        return Failure("infeasible", "no certificate with bound below 1")
    return best


# -- SMT-LIB export ---------------------------------------------------------------------

def _box_smt(system: SwitchedSystem, names) -> str:
    parts = []
    for j, nm in enumerate(names):
        parts.append(f"(>= {nm} {_smt_num(system.lower[j])})")
        parts.append(f"(<= {nm} {_smt_num(system.upper[j])})")
    return "(and " + " ".join(parts) + ")"


def _smt_num(v: float) -> str:
    f = Fraction(float(v))
    num = str(f.numerator) if f.numerator >= 0 else f"(- {-f.numerator})"
    return num if f.denominator == 1 else f"(/ {num} {f.denominator})"


def export_smtlib(
    problem: SynthesisProblem,
    gamma: float,
    c: float,
    path: Optional[str] = None,
    barriers: Optional[Sequence[Poly]] = None,
) -> str:
    """Feasibility template plus (when a candidate is given) its negation query."""
    sysm = problem.system
    names = [f"x{j + 1}" for j in range(problem.dim)]
    box = _box_smt(sysm, names)
    src = problem.spec.source.to_smt(names)
    tgt = problem.spec.target.to_smt(names)
    K = len(problem.basis)
    lines = [
        "; barrier-certificate queries (template, then candidate check if present)",
        "(set-logic NRA)",
        "(push 1)",
        "; feasibility template: free coefficients, universally quantified state",
    ]
    for f in range(problem.n_funcs):
        for k in range(K):
            lines.append(f"(declare-fun a_{f}_{k} () Real)")

    def b_term(f: int) -> str:
        terms = [
            f"(* a_{f}_{k} {poly_to_smt(problem.basis.polys[k], names)})"
            for k in range(K)
        ]
        return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"

    def gen_term(m: int) -> str:
        f = m if problem.multiple else 0
        terms = [
            f"(* a_{f}_{k} {poly_to_smt(problem._gen_polys[m][k], names)})"
            for k in range(K)
        ]
        if problem.multiple:
            rates = sysm.require_rates()
            for mp in range(problem.n_modes):
                terms.append(
                    f"(* {poly_to_smt(rates[m][mp], names)} {b_term(mp)})"
                )
        return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"

    conds = []
    for f in range(problem.n_funcs):
        conds.append(f"(>= {b_term(f)} 0)")
        conds.append(f"(=> {src} (<= {b_term(f)} {_smt_num(gamma)}))")
        conds.append(f"(=> {tgt} (>= {b_term(f)} 1))")
    for m in range(problem.n_modes):
        conds.append(f"(<= {gen_term(m)} {_smt_num(c)})")
    qvars = " ".join(f"({nm} Real)" for nm in names)
    lines.append(
        f"(assert (forall ({qvars}) (=> {box} (and " + " ".join(conds) + "))))"
    )
    lines.append("(check-sat)")
    lines.append("(pop 1)")

    if barriers is not None:
        lines.append("(push 1)")
        lines.append("; candidate check: sat here means a counterexample exists")
        for nm in names:
            lines.append(f"(declare-fun {nm} () Real)")
        lines.append(f"(assert {box})")
        bs = [poly_to_smt(B, names) for B in barriers]
        gens = [poly_to_smt(g, names) for g in problem.generator_exprs(list(barriers))]
        viol = []
        for bsm in bs:
            viol.append(f"(< {bsm} 0)")
            viol.append(f"(and {src} (> {bsm} {_smt_num(gamma)}))")
            viol.append(f"(and {tgt} (< {bsm} 1))")
        for gsm in gens:
            viol.append(f"(> {gsm} {_smt_num(c)})")
        lines.append("(assert (or " + " ".join(viol) + "))")
        lines.append("(check-sat)")
        lines.append("(pop 1)")
    text = "\n".join(lines) + "\n"
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputWriteError(f"cannot write SMT-LIB file: {exc}") from None
    return text
