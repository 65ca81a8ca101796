"""End-to-end flows: decompose, certify each reach triple, assemble, cross-check.

Verification translates the negation of the (next-free, safe) formula into a
DFA over the region alphabet, enumerates its accepting runs per start
proposition, synthesizes one certificate per unique (source regions, target
regions) reach task, and assembles per-proposition satisfaction lower bounds.
Simulation estimates the same quantities by Euler-Maruyama sampling and can
refute (never confirm) a report's claims.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from .assembly import TripleBound, TripleKey, report_document
from .automaton import Decomposition, build_decomposition, translate
from .errors import SchemaError, UnsupportedOperatorError
from .ltl import is_safe_fragment, negate_to_pnf
from .mc import Estimate, Policy, default_policies, estimate_satisfaction
from .synthesis import (
    CegisConfig,
    Failure,
    ReachSpec,
    SynthesisProblem,
    VerifiedCertificate,
    export_smtlib,
    make_basis,
    minimize_bound,
)
from .system import SwitchedSystem


def thread_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("STOVERIFY_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SchemaError(f"STOVERIFY_THREADS must be an integer, got {env!r}")
    return 1


def decompose_system(system: SwitchedSystem, allow_revisits: int = 0) -> Decomposition:
    """Violation automaton + per-proposition sequential reach decomposition."""
    if not is_safe_fragment(system.formula):
        raise UnsupportedOperatorError(
            "verification needs a formula in the safe fragment "
            "(negations only on propositions, no eventually/until)"
        )
    negated = negate_to_pnf(system.formula)
    dfa = translate(negated, system.alphabet)
    return build_decomposition(dfa, allow_revisits)


@dataclass
class VerificationOutcome:
    system: SwitchedSystem
    decomposition: Decomposition
    triple_bounds: Dict[TripleKey, TripleBound]
    certificates: Dict[TripleKey, VerifiedCertificate]
    report: dict


def _solve_triple(
    system: SwitchedSystem,
    key: TripleKey,
    degree: int,
    multiple: bool,
    cfg: CegisConfig,
) -> Tuple[TripleBound, Optional[VerifiedCertificate]]:
    source = system.region_of(key[0])
    target = system.region_of(key[1])
    spec = ReachSpec(source, target, system.horizon)
    basis = make_basis(system.lower, system.upper, degree)
    problem = SynthesisProblem(system, spec, basis, multiple=multiple)
    result = minimize_bound(problem, cfg)
    if isinstance(result, Failure):
        detail = f"{result.reason}: {result.detail}" if result.detail else result.reason
        return TripleBound.failed(key, detail), None
    tb = TripleBound.from_gamma_c(
        key, result.gamma, result.c, system.horizon, status="verified"
    )
    return tb, result


def verify_system(
    system: SwitchedSystem,
    *,
    degree: int = 2,
    allow_revisits: int = 0,
    multiple: bool = False,
    config: Optional[CegisConfig] = None,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    smt_dir: Optional[str] = None,
) -> VerificationOutcome:
    """Certify every unique reach triple and assemble per-proposition bounds."""
    if multiple:
        system.require_rates()
    decomposition = decompose_system(system, allow_revisits)
    cfg = config or CegisConfig()
    keys: List[TripleKey] = []
    for t in decomposition.all_triples():
        if t.key() not in keys:
            keys.append(t.key())
    keys.sort(key=lambda k: (sorted(k[0]), sorted(k[1])))

    triple_bounds: Dict[TripleKey, TripleBound] = {}
    certificates: Dict[TripleKey, VerifiedCertificate] = {}
    workers = thread_count(threads)
    if workers == 1 or len(keys) <= 1:
        solved = [_solve_triple(system, k, degree, multiple, cfg) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(
                pool.map(
                    lambda k: _solve_triple(system, k, degree, multiple, cfg), keys
                )
            )
    for key, (tb, cert) in zip(keys, solved):
        triple_bounds[key] = tb
        if cert is not None:
            certificates[key] = cert
        if smt_dir is not None:
            name = "triple_" + "-".join(sorted(key[0])) + "__" + "-".join(sorted(key[1]))
            problem = SynthesisProblem(
                system,
                ReachSpec(
                    system.region_of(key[0]), system.region_of(key[1]), system.horizon
                ),
                make_basis(system.lower, system.upper, degree),
                multiple=multiple,
            )
            export_smtlib(
                problem,
                tb.gamma if tb.gamma is not None else 1.0,
                tb.c if tb.c is not None else 0.0,
                path=os.path.join(smt_dir, name + ".smt2"),
                barriers=cert.barriers if cert is not None else None,
            )

    settings = {
        "degree": degree,
        "allow_revisits": allow_revisits,
        "multiple": multiple,
        "seed": seed,
    }
    report = report_document(
        system_name=system.name,
        formula=system.formula_text,
        horizon=system.horizon,
        decomposition=decomposition,
        triple_bounds=triple_bounds,
        settings=settings,
    )
    return VerificationOutcome(
        system=system,
        decomposition=decomposition,
        triple_bounds=triple_bounds,
        certificates=certificates,
        report=report,
    )


def simulate_props(
    system: SwitchedSystem,
    *,
    trajectories: int = 10_000,
    dt: float = 1e-2,
    seed: int = 0,
    props: Optional[List[str]] = None,
    policies: Optional[List[Policy]] = None,
) -> Dict[str, Dict[str, Estimate]]:
    """Satisfaction estimates per start proposition under each sampling policy."""
    chosen = props if props is not None else list(system.alphabet)
    pols = policies if policies is not None else default_policies(system)
    out: Dict[str, Dict[str, Estimate]] = {}
    for prop in chosen:
        per: Dict[str, Estimate] = {}
        for pol in pols:
            try:
                per[pol.name] = estimate_satisfaction(
                    system, prop, pol, n=trajectories, dt=dt, seed=seed
                )
            except SchemaError:
                # start region admits no samples (empty or negligible volume)
                continue
        if per:
            out[prop] = per
    return out


def mc_cross_check(
    system: SwitchedSystem,
    report: Mapping[str, object],
    *,
    trajectories: int = 10_000,
    dt: float = 1e-2,
    seed: int = 0,
) -> Tuple[dict, List[str]]:
    """Re-estimate each claimed lower bound; list refutations (empty = consistent).

    A claim is refuted when the upper end of the exact 95% confidence interval
    falls below the certified satisfaction lower bound under some policy.
    """
    violations: List[str] = []
    block: Dict[str, object] = {
        "trajectories": trajectories,
        "dt": dt,
        "seed": seed,
        "estimates": {},
    }
    results = report["results"]
    estimates = simulate_props(
        system,
        trajectories=trajectories,
        dt=dt,
        seed=seed,
        props=[p for p in sorted(results) if results[p]["satisfaction_lower"] > 0.0],
    )
    for prop in sorted(estimates):
        lower = results[prop]["satisfaction_lower"]
        block["estimates"][prop] = {}
        for pol_name in sorted(estimates[prop]):
            est = estimates[prop][pol_name]
            block["estimates"][prop][pol_name] = {
                "estimate": est.estimate,
                "ci_lo": est.ci_lo,
                "ci_hi": est.ci_hi,
                "successes": est.successes,
                "trials": est.trials,
            }
            if est.refutes_lower_bound(lower):
                violations.append(
                    f"{prop}: certified satisfaction lower bound {lower:.6f} refuted "
                    f"under policy {pol_name}: MC estimate {est.estimate:.6f} "
                    f"(95% CI [{est.ci_lo:.6f}, {est.ci_hi:.6f}])"
                )
    block["violations"] = violations
    return block, violations
