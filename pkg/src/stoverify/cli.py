"""Command-line client for decomposition, verification, and simulation.

Runs in-process by default; with --server URL the same request is POSTed to a
running service instance and the response handled identically, so artifacts
and exit codes do not depend on the transport.

Exit codes: 0 success; 2 input problem; 3 internal/transport failure;
4 a --check run refuted a certified bound.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .errors import InputError, OutputWriteError
from .service import ops
from .service.schemas import (
    DecomposeRequest,
    DecomposeResponse,
    SimulateRequest,
    SimulateResponse,
    VerifyRequest,
    VerifyResponse,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3
EXIT_REFUTED = 4


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _write_text(path: str, text: str) -> None:
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputWriteError(f"cannot write {path}: {exc}") from None


def _post(server: str, route: str, payload: dict, response_model):
    import httpx

    url = server.rstrip("/") + route
    try:
        resp = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        raise OutputWriteError(f"request to {url} failed: {exc}") from None
    if resp.status_code == 422:
        body = resp.json()
        if isinstance(body, dict) and "message" in body:
            raise InputError(f"{body.get('error', 'InputError')}: {body['message']}")
        raise InputError(f"server rejected the request: {resp.text}")
    if resp.status_code != 200:
        raise OutputWriteError(f"server error {resp.status_code}: {resp.text[:500]}")
    return response_model.model_validate(resp.json())


def _run_decompose(args) -> int:
    req = DecomposeRequest(
        system=_load_json(args.system), allow_revisits=args.allow_revisits
    )
    if args.server:
        resp = _post(args.server, "/decompose", req.model_dump(), DecomposeResponse)
    else:
        resp = ops.do_decompose(req)
    print(resp.dfa, end="")
    print(f"accepting runs ({len(resp.runs)}):")
    for r in resp.runs:
        print(f"  {r}")
    for prop, pd in sorted(resp.props.items()):
        flag = "  [immediate violation]" if pd.immediate_violation else ""
        print(f"start {prop}:{flag}")
        if not pd.chains:
            print("  (no accepting run starts here; satisfaction bound is 1)")
        for ch in pd.chains:
            tr = " ".join(ch.triples) if ch.triples else "(no triples: trivial bound)"
            print(f"  run ({','.join(ch.run)}): {tr}")
    if args.emit_dfa:
        _write_text(args.emit_dfa, resp.dfa)
    if args.out:
        _write_text(os.path.join(args.out, "dfa.txt"), resp.dfa)
        _write_text(
            os.path.join(args.out, "decomposition.json"),
            json.dumps(resp.model_dump(), indent=2, sort_keys=True) + "\n",
        )
    return EXIT_OK


def _run_verify(args) -> int:
    req = VerifyRequest(
        system=_load_json(args.system),
        degree=args.degree,
        allow_revisits=args.allow_revisits,
        multiple=args.multiple,
        seed=args.seed,
        threads=args.threads,
        emit_smtlib=args.emit_smtlib,
    )
    if args.server:
        resp = _post(args.server, "/verify", req.model_dump(), VerifyResponse)
    else:
        resp = ops.do_verify(req)
    print(resp.artifacts["summary.txt"], end="")
    if args.out:
        _write_text(os.path.join(args.out, "report.json"), resp.report_json)
        for name, text in sorted(resp.artifacts.items()):
            _write_text(os.path.join(args.out, name), text)
    return EXIT_OK


def _run_simulate(args) -> int:
    if args.dump_trajectory:
        return _dump_trajectory(args)
    check_report = _load_json(args.check) if args.check else None
    req = SimulateRequest(
        system=_load_json(args.system),
        trajectories=args.trajectories,
        dt=args.dt,
        seed=args.seed,
        props=args.prop or None,
        policy=args.policy,
        check_report=check_report,
    )
    if args.server:
        resp = _post(args.server, "/simulate", req.model_dump(), SimulateResponse)
    else:
        resp = ops.do_simulate(req)
    for prop in sorted(resp.estimates):
        for pol in sorted(resp.estimates[prop]):
            e = resp.estimates[prop][pol]
            print(
                f"{prop} under {pol}: {e.estimate:.6f} "
                f"[{e.ci_lo:.6f}, {e.ci_hi:.6f}] ({e.successes}/{e.trials})"
            )
    if args.out:
        doc = {
            "estimates": {
                p: {k: v.model_dump() for k, v in per.items()}
                for p, per in resp.estimates.items()
            },
            "violations": resp.violations,
            "checked": resp.checked,
        }
        _write_text(
            os.path.join(args.out, "mc.json"),
            json.dumps(doc, indent=2, sort_keys=True) + "\n",
        )
    if resp.checked:
        if resp.violations:
            for v in resp.violations:
                print(f"REFUTED: {v}", file=sys.stderr)
            return EXIT_REFUTED
        print("check passed: no certified bound refuted")
    return EXIT_OK


def _dump_trajectory(args) -> int:
    if args.server:
        raise InputError("--dump-trajectory runs locally; drop --server")
    from .mc import default_policies, simulate, trace_of
    from .system import system_from_document

    system = system_from_document(_load_json(args.system))
    policies = default_policies(system)
    if args.policy:
        policies = [p for p in policies if p.name == args.policy]
        if not policies:
            raise InputError(f"unknown policy {args.policy!r}")
    if args.x0 is None:
        raise InputError("--dump-trajectory needs --x0")
    x0 = [float(v) for v in args.x0.split(",")]
    traj = simulate(system, x0, policies[0], dt=args.dt, seed=args.seed)
    word = trace_of(system, traj)
    lines = ["t," + ",".join(f"x{j + 1}" for j in range(system.dim)) + ",mode"]
    for i, t in enumerate(traj.times):
        xs = ",".join(repr(float(v)) for v in traj.states[i])
        lines.append(f"{float(t)!r},{xs},{system.modes[traj.modes[i]].id}")
    _write_text(args.dump_trajectory, "\n".join(lines) + "\n")
    print(f"trace: {' '.join(word.letters)}")
    print(f"wrote {args.dump_trajectory}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stoverify",
        description=(
            "Certified lower bounds on finite-horizon temporal-logic satisfaction "
            "for switched stochastic systems"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("system", help="system document (JSON)")
        p.add_argument("--server", help="service URL; default runs in-process")
        p.add_argument("--out", help="directory for artifacts")

    d = sub.add_parser("decompose", help="automaton + reach-triple decomposition")
    common(d)
    d.add_argument("--allow-revisits", type=int, default=0)
    d.add_argument("--emit-dfa", help="write the automaton text to this path")

    v = sub.add_parser("verify", help="synthesize certificates and assemble bounds")
    common(v)
    v.add_argument("--degree", type=int, default=2, help="barrier polynomial degree")
    v.add_argument("--allow-revisits", type=int, default=0)
    v.add_argument("--multiple", action="store_true", help="per-mode coupled barriers")
    v.add_argument("--seed", type=int, default=None, help="recorded in the report")
    v.add_argument("--threads", type=int, default=None)
    v.add_argument("--emit-smtlib", action="store_true")

    s = sub.add_parser("simulate", help="Monte Carlo estimates / report cross-check")
    common(s)
    s.add_argument("--trajectories", type=int, default=10_000)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prop", action="append", help="start proposition (repeatable)")
    s.add_argument("--policy", help="restrict to one switching policy by name")
    s.add_argument("--check", help="verification report to cross-check")
    s.add_argument("--x0", help="comma-separated initial state for --dump-trajectory")
    s.add_argument("--dump-trajectory", help="write one trajectory CSV to this path")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "decompose":
            return _run_decompose(args)
        if args.command == "verify":
            return _run_verify(args)
        return _run_simulate(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OutputWriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
