"""Command line entry point: ``catqm {check,eval,verify,trace,protocols}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from catqm import dsl, flow, protocols, sampling
from catqm.backend import Backend, evaluate, get_backend, matrix_to_json, scalar_to_json
from catqm.errors import CatQMError, OrientationConflict, PathMismatch, PathStuck
from catqm.ir import Base, prim

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catqm", description="Typed string-diagram calculus for protocol checking.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("fdhilb", "rel"), default="fdhilb")
    common.add_argument("--tol", type=float, default=1e-9, help="mixed absolute/relative tolerance (fdhilb)")
    common.add_argument("--output", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized instances")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("check", "parse and typecheck a .cq script"),
                           ("eval", "print the matrix of a term"),
                           ("verify", "run the assertions of a .cq script"),
                           ("trace", "trace the flow line of a network file and check it against the oracle")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("input", type=Path)
        if name == "eval":
            sp.add_argument("--term", help="identifier to evaluate (default: every declaration)")
        if name == "trace":
            sp.add_argument("--permissive", action="store_true",
                            help="cross boxes against their arrow using the transposed label")
    sub.add_parser("protocols", parents=[common], help="run the built-in teleportation, swap and gate suites")
    return ap


# ---------------------------------------------------------------- formatting

def _fmt_entry(v, b: Backend) -> str:
    if b.ring.exact:
        return str(int(bool(v)))
    v = complex(v)
    re_, im = (0.0 if abs(x) < b.tol else x for x in (v.real, v.imag))
    if im == 0:
        return "{:.6g}".format(re_)
    return "{:.6g}{:+.6g}i".format(re_, im)


def format_matrix(m: np.ndarray, b: Backend) -> str:
    cells = [[_fmt_entry(v, b) for v in row] for row in m]
    width = max((len(c) for row in cells for c in row), default=1)
    return "\n".join("  [" + "  ".join(c.rjust(width) for c in row) + "]" for row in cells)


def _fmt_scalar(s) -> str:
    j = scalar_to_json(s)
    if j is None:
        return "-"
    if isinstance(j, list):
        return "{:.6g}{:+.6g}i".format(*j) if j[1] else "{:.6g}".format(j[0])
    return str(j)


def _emit(cfg, payload: dict, lines: list[str]) -> None:
    if cfg.output == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


# ---------------------------------------------------------------- commands

def _load_program(cfg, b: Backend):
    src = cfg.input.read_text(encoding="utf-8")
    program = dsl.parse(src)
    return program, dsl.elaborate(program, b)


def cmd_check(cfg, b: Backend) -> int:
    _, elab = _load_program(cfg, b)
    judgments = {k: "{!r} -> {!r}".format(j.dom, j.cod) for k, j in elab.judgments.items()}
    lines = ["{} : {}".format(k, v) for k, v in judgments.items()]
    lines.append("ok: {} declarations, {} assertions typecheck".format(len(judgments), len(elab.assertions)))
    _emit(cfg, {"backend": b.name, "judgments": judgments, "assertions": len(elab.assertions), "pass": True}, lines)
    return EXIT_OK


def cmd_eval(cfg, b: Backend) -> int:
    _, elab = _load_program(cfg, b)
    names = [cfg.term] if cfg.term else list(elab.terms)
    for n in names:
        if n not in elab.terms:
            raise CatQMError("no morphism or term named {!r}".format(n))
    payload, lines = {"backend": b.name, "terms": {}}, []
    for n in names:
        m = evaluate(elab.terms[n], b)
        j = elab.judgments[n]
        payload["terms"][n] = {"type": "{!r} -> {!r}".format(j.dom, j.cod), "matrix": matrix_to_json(m, b)}
        lines += ["{} : {!r} -> {!r}".format(n, j.dom, j.cod), format_matrix(m, b)]
    _emit(cfg, payload, lines)
    return EXIT_OK


def cmd_verify(cfg, b: Backend) -> int:
    _, elab = _load_program(cfg, b)
    report = dsl.run_asserts(elab, b)
    lines = []
    for r in report.results:
        extra = "  scalar {}".format(_fmt_scalar(r.scalar)) if r.op == "~=" else ""
        lines.append("{} line {}: {}{}".format("PASS" if r.passed else "FAIL", r.line, r.text, extra))
    npass = sum(r.passed for r in report.results)
    lines.append("{}/{} assertions pass".format(npass, len(report.results)))
    _emit(cfg, report.to_json(), lines)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_trace(cfg, b: Backend) -> int:
    net = flow.load_flow(cfg.input, b, seed=cfg.seed)
    try:
        verdict = flow.verify_flow(net, b, strict=not cfg.permissive)
    except (PathStuck, PathMismatch, OrientationConflict) as e:
        _emit(cfg, {"backend": b.name, "seed": cfg.seed, "error": str(e), "pass": False}, ["FAIL " + str(e)])
        return EXIT_FAIL
    payload = {"backend": b.name, "seed": cfg.seed, **verdict.to_json(b)}
    steps = ["  {} {} -> {} via {}{}".format(s.label, s.enter, s.leave, s.through, "" if s.aligned else " (reversed)")
             for s in verdict.path.steps]
    lines = ["path: " + " . ".join(reversed(verdict.path.labels))] + steps
    if verdict.k_zero:
        lines.append("oracle state is zero (k = 0); no up-to-scalar claim")
    else:
        lines.append("equal up to scalar: {} (k = {})".format(verdict.equal_up_to_scalar, _fmt_scalar(verdict.scalar)))
    lines.append("PASS" if verdict.passed else "FAIL")
    _emit(cfg, payload, lines)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def protocol_suite(b: Backend, seed: int) -> list[dict]:
    """Every built-in protocol check that makes sense in backend ``b``, seeded."""
    out = []
    specs = [protocols.teleportation_spec(), protocols.teleportation_spec(normalized=True),
             protocols.entanglement_swap_spec()]
    gen = sampling.rng(seed)
    if not b.ring.exact:
        u = sampling.unitary(gen, 2)
        gate = prim("U", protocols.Q, protocols.Q, fdhilb=u, invertible=True, inverse={"fdhilb": u.conj().T})
        specs.append(protocols.gate_teleportation_spec(gate, b))
    for spec in specs:
        if b.name not in spec.backends:
            continue
        rep = protocols.verify(spec, b).to_json()
        rep["seed"] = seed if spec.name == "gate-teleportation" else None
        out.append(rep)
    # compositionality on seeded random pairs
    ok, cases = True, 5
    for _ in range(cases):
        da, db, dc = (int(x) for x in gen.integers(1, 5, size=3))
        if b.ring.exact:
            f1 = prim("f1", Base("A", da), Base("B", db), rel=sampling.relation(gen, db, da))
            f2 = prim("f2", Base("B", db), Base("C", dc), rel=sampling.relation(gen, dc, db))
        else:
            f1 = prim("f1", Base("A", da), Base("B", db), fdhilb=sampling.complex_matrix(gen, db, da))
            f2 = prim("f2", Base("B", db), Base("C", dc), fdhilb=sampling.complex_matrix(gen, dc, db))
        ok = protocols.compositionality_check(f1, f2, b) and ok
    out.append({"protocol": "compositionality", "backend": b.name, "seed": seed, "cases": cases, "pass": ok})
    return out


def cmd_protocols(cfg, b: Backend) -> int:
    results = protocol_suite(b, cfg.seed)
    lines = []
    for r in results:
        if "branches" in r:
            npass = sum(br["pass"] for br in r["branches"])
            lines.append("{} {}: {}/{} branches pass".format("PASS" if r["pass"] else "FAIL", r["protocol"], npass,
                                                             len(r["branches"])))
        else:
            lines.append("{} {}: {} seeded cases".format("PASS" if r["pass"] else "FAIL", r["protocol"], r["cases"]))
    passed = all(r["pass"] for r in results)
    _emit(cfg, {"backend": b.name, "seed": cfg.seed, "protocols": results, "pass": passed}, lines)
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {"check": cmd_check, "eval": cmd_eval, "verify": cmd_verify, "trace": cmd_trace,
            "protocols": cmd_protocols}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    cfg = ap.parse_args(argv)
    if not cfg.tol > 0:
        ap.error("--tol must be positive")
    b = get_backend(cfg.backend, cfg.tol)
    try:
        return COMMANDS[cfg.command](cfg, b)
    except (CatQMError, OSError, ValueError) as e:
        print("error: {}".format(e), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
