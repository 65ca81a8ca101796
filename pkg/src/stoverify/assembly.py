"""Combining per-triple reach bounds into per-proposition probability bounds.

Each accepting run of the violation automaton contributes the product of its
reach-triple bounds; the per-proposition violation bound is the (clamped) sum
over runs that can start on that proposition. A two-state run has no triples,
so its product is the empty product 1 and the proposition gets the trivial
bound. A missing or failed triple certificate likewise enters as 1.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple

from .automaton import Decomposition, PropDecomposition, ReachTriple, format_dfa_text

TripleKey = Tuple[FrozenSet[str], FrozenSet[str]]


@dataclass(frozen=True)
class TripleBound:
    """Certified (or failed) reach bound for one source->target region task."""

    source_labels: FrozenSet[str]
    target_labels: FrozenSet[str]
    bound: float
    status: str  # "verified" | "failed" | "trivial"
    gamma: Optional[float] = None
    c: Optional[float] = None
    detail: str = ""

    @property
    def key(self) -> TripleKey:
        return (self.source_labels, self.target_labels)

    @classmethod
    def from_gamma_c(cls, key: TripleKey, gamma: float, c: float, horizon: float,
                     status: str = "verified", detail: str = "") -> "TripleBound":
        return cls(
            source_labels=key[0],
            target_labels=key[1],
            bound=min(1.0, gamma + c * horizon),
            status=status,
            gamma=gamma,
            c=c,
            detail=detail,
        )

    @classmethod
    def failed(cls, key: TripleKey, detail: str) -> "TripleBound":
        return cls(
            source_labels=key[0],
            target_labels=key[1],
            bound=1.0,
            status="failed",
            detail=detail,
        )


def assemble_upper(
    pdec: PropDecomposition, bounds: Mapping[TripleKey, float]
) -> float:
    """Upper bound on the violation probability for traces starting on pdec.prop."""
    if pdec.immediate_violation:
        return 1.0
    total = 0.0
    for chain in pdec.chains:
        product = 1.0
        for t in chain.all_triples():
            product *= max(0.0, min(1.0, bounds.get(t.key(), 1.0)))
        total += product
    return min(1.0, total)


def assemble_lower(
    pdec: PropDecomposition, bounds: Mapping[TripleKey, float]
) -> float:
    """Certified lower bound on the satisfaction probability."""
    return max(0.0, 1.0 - assemble_upper(pdec, bounds))


def _label_str(labels: FrozenSet[str]) -> str:
    return ";".join(sorted(labels))


def triple_name(t: ReachTriple) -> str:
    """Unambiguous row id: state window plus the region sets it certifies."""
    return (
        "->".join(t.states)
        + "@"
        + _label_str(t.source_labels)
        + "=>"
        + _label_str(t.target_labels)
    )


def _triple_rows(
    decomposition: Decomposition, triple_bounds: Mapping[TripleKey, TripleBound]
) -> list:
    rows = []
    for t in decomposition.all_triples():
        tb = triple_bounds.get(t.key())
        rows.append(
            {
                "triple": triple_name(t),
                "entry": t.entry,
                "source": sorted(t.source_labels),
                "target": sorted(t.target_labels),
                "gamma": None if tb is None else tb.gamma,
                "c": None if tb is None else tb.c,
                "bound": 1.0 if tb is None else tb.bound,
                "status": "missing" if tb is None else tb.status,
                "detail": "" if tb is None else tb.detail,
            }
        )
    return rows


def report_document(
    system_name: str,
    formula: str,
    horizon: float,
    decomposition: Decomposition,
    triple_bounds: Mapping[TripleKey, TripleBound],
    settings: Mapping[str, object],
    mc_cross_check: Optional[Mapping[str, object]] = None,
) -> dict:
    """Deterministic report structure; no timestamps, canonical ordering."""
    bounds = {k: tb.bound for k, tb in triple_bounds.items()}
    results = {}
    for prop in sorted(decomposition.by_prop):
        pdec = decomposition.by_prop[prop]
        upper = assemble_upper(pdec, bounds)
        results[prop] = {
            "violation_upper": upper,
            "satisfaction_lower": max(0.0, 1.0 - upper),
            "immediate_violation": pdec.immediate_violation,
            "runs": [
                {
                    "states": list(chain.run.states),
                    "entry": chain.entry is not None,
                    "triples": ["->".join(t.states) for t in chain.all_triples()],
                }
                for chain in pdec.chains
            ],
        }
    return {
        "tool": "stoverify",
        "kind": "verification-report",
        "system": system_name,
        "formula": formula,
        "horizon": horizon,
        "settings": dict(settings),
        "dfa": format_dfa_text(decomposition.dfa),
        "runs": ["(" + ",".join(r.states) + ")" for r in decomposition.runs],
        "triples": _triple_rows(decomposition, triple_bounds),
        "results": results,
        "mc_cross_check": dict(mc_cross_check) if mc_cross_check else None,
        "notes": [
            "Certificates are checked on a dense cell grid with derivative-based "
            "interval inflation in floating point; this is a numerical soundness "
            "check, not an exhaustive algebraic proof.",
            "Monte Carlo cross-checks can only refute a claimed bound, never "
            "confirm it.",
            "Lower bounds apply to traces that start in the stated proposition's "
            "region; propositions with no nontrivial run decomposition report 0.",
            "Accepting runs are enumerated as simple state paths (self-loops "
            "collapsed); the allow-revisits setting bounds how often a state may "
            "be revisited beyond that.",
        ],
    }


def canonical_json(doc: Mapping[str, object]) -> bytes:
    """Byte-stable encoding: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def triples_csv(
    decomposition: Decomposition, triple_bounds: Mapping[TripleKey, TripleBound]
) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["triple", "gamma", "c", "bound", "status"])
    for row in _triple_rows(decomposition, triple_bounds):
        w.writerow(
            [
                row["triple"],
                "" if row["gamma"] is None else repr(row["gamma"]),
                "" if row["c"] is None else repr(row["c"]),
                repr(row["bound"]),
                row["status"],
            ]
        )
    return buf.getvalue()


def human_summary(doc: Mapping[str, object]) -> str:
    lines = [
        f"system: {doc['system']}",
        f"formula: {doc['formula']}",
        f"horizon: {doc['horizon']}",
        "",
        "proposition  violation<=   satisfaction>=  note",
    ]
    for prop, res in sorted(doc["results"].items()):
        if res["immediate_violation"]:
            note = "immediate violation possible"
        elif res["satisfaction_lower"] > 0.0:
            note = ""
        elif any(chain["triples"] for chain in res["runs"]):
            note = "no certificate for some run (see triples)"
        elif res["runs"]:
            note = "trivial (runs too short to decompose)"
        else:
            note = "no accepting run starts here"
        lines.append(
            f"{prop:<12} {res['violation_upper']:<13.6f} "
            f"{res['satisfaction_lower']:<15.6f} {note}"
        )
    lines.append("")
    lines.append(
        "triple                          gamma        c            bound        status"
    )
    for row in doc["triples"]:
        g = "-" if row["gamma"] is None else f"{row['gamma']:.6f}"
        c = "-" if row["c"] is None else f"{row['c']:.6f}"
        lines.append(
            f"{row['triple']:<31} {g:<12} {c:<12} {row['bound']:<12.6f} {row['status']}"
        )
    for note in doc["notes"]:
        lines.append("")
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"
