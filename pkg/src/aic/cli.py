"""Command line entry point: ``aic <command> ...``.

Exit codes: 0 success, 1 type or formation error, 2 parse error,
3 property failure or simulation mismatch, 4 budget exceeded.
"""
from __future__ import annotations

import argparse
import sys

from .generate import GenConfig
from .machine import (
    DEFAULT_MAX_STATES, DEFAULT_MAX_STEPS, MachineState, RuntimeShapeError, classify_stuck, explore,
    run,
)
from .properties import PROPERTIES
from .surface import ParseError, parse, print_file
from .syntax import ContractViolation, MalformedProgram
from .translation import check_simulation, translate_file
from .typecheck import Mode, TypingError, typecheck

OK, TYPE_ERROR, PARSE_ERROR, FAILED, BUDGET = 0, 1, 2, 3, 4


def _mode_flags(p: argparse.ArgumentParser, system: str = "base") -> None:
    p.add_argument("--system", choices=["base", "effects"], default=system)
    p.add_argument("--stratified", action="store_true", help="stratified regions (implies effects)")
    p.add_argument("--confluent", action="store_true", help="confluence restrictions")


def _mode(args) -> Mode:
    system = "effects" if args.stratified else args.system
    return Mode(system, args.stratified, args.confluent)


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aic", description="Typecheck, run and analyse programs of the region calculus.",
        epilog="exit codes: 0 ok, 1 type error, 2 parse error, 3 property failure or mismatch, 4 budget exceeded",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="typecheck a program")
    p.add_argument("file")
    _mode_flags(p)
    p.add_argument("--report", action="store_true", help="print the full typing report")

    p = sub.add_parser("run", help="execute a program")
    p.add_argument("file")
    p.add_argument("--scheduler", choices=["leftmost", "seeded"], default="leftmost")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--trace", action="store_true")

    p = sub.add_parser("explore", help="enumerate all interleavings")
    p.add_argument("file")
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)

    p = sub.add_parser("translate", help="print the translation to the target system")
    p.add_argument("file")
    _mode_flags(p, "effects")

    p = sub.add_parser("simulate", help="run a program and its translation in lockstep")
    p.add_argument("file")
    p.add_argument("--scheduler", choices=["leftmost", "seeded"], default="seeded")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    _mode_flags(p, "effects")

    p = sub.add_parser("prop", help="run a property suite on generated programs")
    p.add_argument("name", choices=sorted(PROPERTIES))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=4)
    _mode_flags(p)

    p = sub.add_parser("fmt", help="pretty-print a program")
    p.add_argument("file")
    return ap


def _check(args, out) -> int:
    f = _load(args.file)
    mode = _mode(args)
    report = typecheck(f, mode)
    for w in report.warnings:
        print(f"{args.file}: warning: {w}", file=sys.stderr)
    if args.report:
        print(report.render(f), file=out)
    else:
        print(f"ok ({mode}): {report.type}", file=out)
    return OK


def _run(args, out) -> int:
    f = _load(args.file)
    trace = run(MachineState.load(f.program), args.scheduler, args.seed, args.max_steps, keep=args.trace)
    if args.trace:
        for line in trace.lines():
            print(line, file=out)
    print(f"{trace.outcome} after {trace.steps} step(s)", file=out)
    print(trace.final.fingerprint, file=out)
    if trace.outcome == "NormalForm":
        print(f"quiescent: {classify_stuck(trace.final)}", file=out)
        return OK
    return BUDGET


def _explore(args, out) -> int:
    f = _load(args.file)
    res = explore(MachineState.load(f.program), args.max_states)
    print(f"states: {res.states}", file=out)
    print(f"normal forms: {len(res.normal_forms)}", file=out)
    for nf in sorted(res.normal_forms):
        print(f"  {nf}", file=out)
    print(f"diamond violations: {len(res.violations)}", file=out)
    for fp, a, b in res.violations:
        print(f"  at {fp}: {a} / {b}", file=out)
    if res.exhausted:
        print("state budget exceeded", file=out)
        return BUDGET
    return OK


def _translate(args, out) -> int:
    print(translate_file(_load(args.file), _mode(args)), end="", file=out)
    return OK


def _simulate(args, out) -> int:
    f = _load(args.file)
    verdict = check_simulation(f, args.scheduler, args.seed, args.max_steps, _mode(args))
    for n, st in enumerate(verdict.steps, 1):
        extra = f" residual {', '.join(st.residual)}" if st.residual else ""
        print(f"step {n}: {st.source} ~ {st.target}{extra}", file=out)
    print(verdict, file=out)
    if verdict.outcome == "Mismatch":
        return FAILED
    return BUDGET if verdict.outcome == "StepLimit" else OK


def _prop(args, out) -> int:
    cfg = GenConfig(seed=args.seed, max_depth=args.depth, mode=_mode(args))
    result = PROPERTIES[args.name](args.n, cfg)
    print(result.render(), file=out)
    return OK if result.ok else FAILED


def _fmt(args, out) -> int:
    print(print_file(_load(args.file)), end="", file=out)
    return OK


COMMANDS = {
    "check": _check, "run": _run, "explore": _explore, "translate": _translate,
    "simulate": _simulate, "prop": _prop, "fmt": _fmt,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except ParseError as exc:
        print(f"{args.file}:{exc.line}:{exc.col}: parse error: {exc.message}", file=sys.stderr)
        return PARSE_ERROR
    except TypingError as exc:
        for d in exc.diagnostics:
            print(f"{args.file}: {d}", file=sys.stderr)
        return TYPE_ERROR
    except (RuntimeShapeError, MalformedProgram, ContractViolation) as exc:
        print(f"{args.file}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return TYPE_ERROR
    except OSError as exc:
        print(f"aic: {exc}", file=sys.stderr)
        return PARSE_ERROR


if __name__ == "__main__":
    sys.exit(main())
