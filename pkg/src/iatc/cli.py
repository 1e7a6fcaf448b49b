"""Command-line front end.

Exit codes: 0 solved, 1 type error, 2 ambiguous, 3 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import differential, flatrules, modes, treegen
from .constraints import render
from .solver import Ambiguous, Failed, Outcome, Solved, Verdict, classify, free_vars
from .solver import check as solver_check
from .solver import infer as solver_infer
from .syntax import ParseError, parse_context, parse_term, parse_type
from .treegen import Start
from .types import Context

EXIT = {Verdict.SAT: 0, Verdict.UNSAT: 1, Verdict.UNKNOWN: 2}
USAGE_ERROR = 3


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means "ambiguous" here
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="iatc", description="Constraint-tree type inference for a small lambda calculus.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def common(p: argparse.ArgumentParser, term: bool = True) -> None:
        if term:
            p.add_argument("term")
        p.add_argument("--system", choices=("stlc", "hm"), default="hm")
        p.add_argument("--ctx", default="", help="typing context, inline or @file")
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("infer", help="infer a type")
    common(p)
    p.add_argument("--start", choices=("mono", "poly"), default="poly")
    p.add_argument("--trace", action="store_true", help="solver trace on stderr")

    p = sub.add_parser("check", help="check against a type")
    common(p)
    p.add_argument("--type", dest="expected", required=True)
    p.add_argument("--trace", action="store_true")

    p = sub.add_parser("fv", help="free-variable analysis")
    common(p)

    p = sub.add_parser("tree", help="print the constraint tree")
    p.add_argument("term")
    p.add_argument("--system", choices=("stlc", "hm"), default="hm")
    p.add_argument("--ctx", default="")
    p.add_argument("--start", choices=("mono", "poly"), default="poly")
    p.add_argument("--format", choices=("text", "json", "dot"), default="text")
    p.add_argument("--lift", action="store_true", help="lift quantifiers to the root")

    p = sub.add_parser("flat", help="print the flat constraint set")
    common(p, term=True)

    p = sub.add_parser("modes", help="mode analysis of the typing rules")
    p.add_argument("--mode", default=None, help='e.g. "+ + -"; omit for the full mode table')
    p.add_argument("--system", choices=("stlc", "hm"), default="stlc")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("fuzz", help="differential run against algorithm W")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", choices=("W", "M"), default="W")
    p.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _read_ctx(text: str) -> Context:
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    return parse_context(text)


def _json(status: str, result, diagnostics: list[str]) -> str:
    return json.dumps({"status": status, "result": result, "diagnostics": diagnostics}, indent=2) + "\n"


def _status(v: Verdict) -> str:
    return {Verdict.SAT: "sat", Verdict.UNSAT: "unsat", Verdict.UNKNOWN: "unknown"}[v]


def describe(outcome: Outcome) -> tuple[Optional[str], list[str]]:
    """(result text, diagnostics) for an outcome."""
    if isinstance(outcome, Solved):
        return str(outcome.result), []
    if isinstance(outcome, Failed):
        return None, [outcome.message]
    diag = [outcome.reason] if outcome.reason else []
    if outcome.result is None:
        return None, diag or ["ambiguous"]
    return str(outcome.result), [f"ambiguous: {len(outcome.unsolved)} unsolved"] + diag


def _emit_outcome(outcome: Outcome, fmt: str, out: TextIO) -> int:
    verdict = classify(outcome)
    result, diags = describe(outcome)
    if fmt == "json":
        out.write(_json(_status(verdict), result, diags))
    elif isinstance(outcome, Ambiguous) and result is not None:
        out.write(f"{result} ({diags[0]})\n")
    elif result is not None:
        out.write(result + "\n")
    else:
        out.write(("error: " if verdict is Verdict.UNSAT else "ambiguous: ") + "; ".join(diags) + "\n")
    return EXIT[verdict]


def _tracer(enabled: bool, err: TextIO):
    return (lambda line: err.write(line + "\n")) if enabled else None


def _start(name: str, system: str) -> Start:
    # a polymorphic start only makes sense with generalisation available
    return Start.POLY if name == "poly" and system == "hm" else Start.MONO


def cmd_infer(a, out, err) -> int:
    term, ctx = parse_term(a.term), _read_ctx(a.ctx)
    outcome = solver_infer(term, ctx, a.system, _start(a.start, a.system), trace=_tracer(a.trace, err))
    return _emit_outcome(outcome, a.format, out)


def cmd_check(a, out, err) -> int:
    term, ctx, expected = parse_term(a.term), _read_ctx(a.ctx), parse_type(a.expected)
    outcome = solver_check(term, ctx, expected, a.system, trace=_tracer(a.trace, err))
    verdict = classify(outcome)
    _, diags = describe(outcome)
    if a.format == "json":
        out.write(_json(_status(verdict), verdict is Verdict.SAT, diags))
    elif verdict is Verdict.SAT:
        out.write(f"ok: {a.term} : {expected}\n")
    else:
        out.write(("error: " if verdict is Verdict.UNSAT else "ambiguous: ") + "; ".join(diags) + "\n")
    return EXIT[verdict]


def cmd_fv(a, out, err) -> int:
    fv = free_vars(parse_term(a.term), a.system, _read_ctx(a.ctx))
    verdict = classify(fv.outcome)
    if isinstance(fv.outcome, Failed):
        return _emit_outcome(fv.outcome, a.format, out)
    # requirements fully determine the term's type, so residual variables are expected here
    if a.format == "json":
        result = {"requirements": {n: str(t) for n, t in fv.requirements},
                  "type": None if fv.result is None else str(fv.result)}
        out.write(_json("sat", result, []))
    else:
        for name, t in fv.requirements:
            out.write(f"{name} : {t}\n")
        out.write(f"|- {fv.result}\n")
    return 0 if verdict is not Verdict.UNSAT else 1


def cmd_tree(a, out, err) -> int:
    tree = treegen.build_tree(parse_term(a.term), _read_ctx(a.ctx), a.system, _start(a.start, a.system))
    if a.lift:
        tree = treegen.lift_quantifiers(tree)
    render = {"text": treegen.render_text, "json": treegen.render_json, "dot": treegen.render_dot}[a.format]
    out.write(render(tree))
    return 0


def cmd_flat(a, out, err) -> int:
    d = flatrules.generate_flat(parse_term(a.term), a.system)
    report = flatrules.check_linearity(d)
    if a.format == "json":
        result = {"root": str(d.root_ctx), "result": f"t{d.result}",
                  "constraints": [{"rule": rule, "text": text} for rule, text in _flat_rows(d)]}
        out.write(_json("ok" if report.ok else "nonlinear", result, [str(v) for v in report.violations]))
    else:
        out.write(flatrules.render_flat(d))
        out.write("linear: ok\n" if report.ok else "".join(f"linear: {v}\n" for v in report.violations))
    return 0 if report.ok else 1


def _flat_rows(d: flatrules.FlatDerivation) -> list[tuple[str, str]]:
    owner = {i: f"{e.rule}#{n}" for n, e in enumerate(d.trace) for i in e.emitted}
    return [(owner.get(i, "?"), render(c)) for i, c in enumerate(d.constraints)]


def cmd_modes(a, out, err) -> int:
    rules = modes.HM_RULES if a.system == "hm" else modes.STLC_RULES
    if a.mode is None:
        reports = modes.classify_table_modes(rules)
        if a.format == "json":
            result = [{"mode": str(r.mode), "label": r.label, "moded": r.moded,
                       "failing_rule": r.failing_rule, "reason": r.reason} for r in reports]
            out.write(_json("ok", result, [modes.DEFAULT_TABLE.description]))
        else:
            out.write(modes.render_report(reports))
        return 0
    mode = modes.JudgmentMode.parse(a.mode)
    texts: list[str] = []
    problems: list[str] = []
    for rule in rules:
        moded = modes.assign_modes(rule, mode)
        if isinstance(moded, modes.Unmoded):
            problems.append(f"{rule.name}: {moded.reason}")
        else:
            texts.append(modes.render_moded(moded))
    if a.format == "json":
        out.write(_json("ok" if not problems else "unmoded", texts, problems))
    else:
        out.write(f"mode {mode}\n\n" + "\n".join(texts))
        for p in problems:
            out.write(f"unmoded {p}\n")
    return 0 if not problems else 1


def cmd_fuzz(a, out, err) -> int:
    report = differential.differential(a.seed, a.count, a.reference)
    if a.format == "json":
        out.write(_json("ok" if report.ok else "mismatch", report.summary(), report.counterexamples[:1]))
    else:
        out.write(report.render())
    return 0 if report.ok else 1


COMMANDS = {"infer": cmd_infer, "check": cmd_check, "fv": cmd_fv, "tree": cmd_tree,
            "flat": cmd_flat, "modes": cmd_modes, "fuzz": cmd_fuzz}


def run(argv: Sequence[str], out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        args = build_parser().parse_args(list(argv))
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return USAGE_ERROR
    try:
        return COMMANDS[args.command](args, out, err)
    except ParseError as exc:
        err.write(f"parse error: {exc}\n")
        return USAGE_ERROR
    except (ValueError, OSError, treegen.LiftError) as exc:
        err.write(f"error: {exc}\n")
        return USAGE_ERROR


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
