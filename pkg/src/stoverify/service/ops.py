"""Operation handlers shared by the HTTP service and the in-process CLI path.

Each handler takes a request model and returns a response model; all file
artifacts are returned as named strings so the caller decides where (and
whether) to write them. Reports are carried as exact JSON bytes (decoded
UTF-8) to keep the output byte-stable regardless of transport.
"""

from __future__ import annotations

import os
import tempfile
from typing import Dict, List

from ..assembly import canonical_json, human_summary, triples_csv
from ..automaton import format_dfa_text
from ..errors import SchemaError
from ..mc import default_policies
from ..pipeline import decompose_system, mc_cross_check, simulate_props, verify_system
from ..system import system_from_document
from .schemas import (
    ChainInfo,
    DecomposeRequest,
    DecomposeResponse,
    EstimateInfo,
    PropBounds,
    PropDecompositionInfo,
    SimulateRequest,
    SimulateResponse,
    TripleKeyInfo,
    VerifyRequest,
    VerifyResponse,
)


def do_decompose(req: DecomposeRequest) -> DecomposeResponse:
    system = system_from_document(req.system)
    dec = decompose_system(system, req.allow_revisits)
    props = {}
    for prop in sorted(dec.by_prop):
        pd = dec.by_prop[prop]
        props[prop] = PropDecompositionInfo(
            immediate_violation=pd.immediate_violation,
            chains=[
                ChainInfo(
                    run=list(ch.run.states),
                    entry=ch.entry is not None,
                    triples=["->".join(t.states) for t in ch.all_triples()],
                )
                for ch in pd.chains
            ],
        )
    seen = []
    for t in dec.all_triples():
        k = (sorted(t.source_labels), sorted(t.target_labels))
        if k not in seen:
            seen.append(k)
    seen.sort()
    return DecomposeResponse(
        dfa=format_dfa_text(dec.dfa),
        runs=["(" + ",".join(r.states) + ")" for r in dec.runs],
        props=props,
        triple_keys=[TripleKeyInfo(source=s, target=t) for s, t in seen],
    )


def do_verify(req: VerifyRequest) -> VerifyResponse:
    system = system_from_document(req.system)
    artifacts: Dict[str, str] = {}
    if req.emit_smtlib:
        with tempfile.TemporaryDirectory() as tmp:
            outcome = verify_system(
                system,
                degree=req.degree,
                allow_revisits=req.allow_revisits,
                multiple=req.multiple,
                threads=req.threads,
                seed=req.seed,
                smt_dir=tmp,
            )
            for name in sorted(os.listdir(tmp)):
                with open(os.path.join(tmp, name), "r", encoding="utf-8") as fh:
                    artifacts[name] = fh.read()
    else:
        outcome = verify_system(
            system,
            degree=req.degree,
            allow_revisits=req.allow_revisits,
            multiple=req.multiple,
            threads=req.threads,
            seed=req.seed,
        )
    report_json = canonical_json(outcome.report).decode("utf-8")
    artifacts["triples.csv"] = triples_csv(outcome.decomposition, outcome.triple_bounds)
    artifacts["summary.txt"] = human_summary(outcome.report)
    artifacts["dfa.txt"] = format_dfa_text(outcome.decomposition.dfa)
    results = {
        prop: PropBounds(
            violation_upper=res["violation_upper"],
            satisfaction_lower=res["satisfaction_lower"],
            immediate_violation=res["immediate_violation"],
        )
        for prop, res in outcome.report["results"].items()
    }
    return VerifyResponse(report_json=report_json, results=results, artifacts=artifacts)


def _select_policies(system, name):
    policies = default_policies(system)
    if name is None:
        return policies
    chosen = [p for p in policies if p.name == name]
    if not chosen:
        available = ", ".join(p.name for p in policies)
        raise SchemaError(f"unknown policy {name!r}; available: {available}")
    return chosen


def do_simulate(req: SimulateRequest) -> SimulateResponse:
    system = system_from_document(req.system)
    policies = _select_policies(system, req.policy)
    violations: List[str] = []
    if req.check_report is not None:
        if not isinstance(req.check_report.get("results"), dict):
            raise SchemaError("check report must contain a 'results' mapping")
        block, violations = mc_cross_check(
            system,
            req.check_report,
            trajectories=req.trajectories,
            dt=req.dt,
            seed=req.seed,
        )
        estimates = {
            prop: {
                pol: EstimateInfo(confidence=0.95, **vals)
                for pol, vals in per.items()
            }
            for prop, per in block["estimates"].items()
        }
        return SimulateResponse(
            estimates=estimates, violations=violations, checked=True
        )
    raw = simulate_props(
        system,
        trajectories=req.trajectories,
        dt=req.dt,
        seed=req.seed,
        props=req.props,
        policies=policies,
    )
    estimates = {
        prop: {
            pol: EstimateInfo(
                estimate=est.estimate,
                ci_lo=est.ci_lo,
                ci_hi=est.ci_hi,
                successes=est.successes,
                trials=est.trials,
                confidence=est.confidence,
            )
            for pol, est in per.items()
        }
        for prop, per in raw.items()
    }
    return SimulateResponse(estimates=estimates, violations=[], checked=False)
