"""Command line interface: check, run, denote and conform on .ceff files."""
from __future__ import annotations

import argparse
import json
import os
import sys

from .conformance import run_conformance
from .denote import denote_program
from .eval import MaxStepsExceeded, OpAtTop, Terminal, run_program
from .freemodel import Coerce, Leaf, Node, tree_to_json
from .grading import GradingError
from .parser import CeffError, load_bundle
from .signature import NonComparable, SignatureError
from .terms import pp_comp, pp_type
from .typecheck import CateffTypeError, MissingClause, check_bundle, grade_of_computation


def _default_max_steps() -> int:
    env = os.environ.get("CATEFF_MAX_STEPS")
    return int(env) if env else 100_000


def _load(path):
    try:
        return load_bundle(path)
    except (CeffError, GradingError, SignatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(1)


def cmd_check(args) -> int:
    bundle = _load(args.file)
    try:
        judgements = check_bundle(bundle)
    except CateffTypeError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return 1
    for name, j in judgements.items():
        print(f"⊢_{{{j.grade}}} {name} : {pp_type(j.result_type)}")
    return 0


def cmd_run(args) -> int:
    bundle = _load(args.file)
    try:
        check_bundle(bundle)
    except CateffTypeError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return 1
    status = 0
    for name, prog in bundle.programs.items():
        try:
            trace = run_program(prog, max_steps=args.max_steps)
        except (MaxStepsExceeded, MissingClause) as exc:
            print(f"{name}: error: {exc}", file=sys.stderr)
            status = 2
            continue
        if args.trace:
            for i, config in enumerate(trace.configs):
                _, grade = grade_of_computation((), config, prog.signature)
                print(f"{name}[{i}] @ {grade}: {pp_comp(config)}")
        final = trace.final
        if isinstance(final, Terminal):
            note = "  (residual weakening)" if final.weakens else ""
            print(f"{name}: {pp_comp(trace.configs[-1])}{note}")
        elif isinstance(final, OpAtTop):
            print(f"{name}: about to perform {final.op} "
                  f"(free operation of {final.sig.name})")
    return status


def cmd_denote(args) -> int:
    bundle = _load(args.file)
    try:
        check_bundle(bundle)
    except CateffTypeError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return 1
    for name, prog in bundle.programs.items():
        tree = denote_program(prog)
        if args.json:
            try:
                print(json.dumps({name: tree_to_json(tree)}, sort_keys=True))
            except NonComparable:
                print(f"{name}: tree carries function-space leaves; "
                      f"not serializable", file=sys.stderr)
                return 1
        else:
            print(f"{name}: {_pp_tree(tree)}")
    return 0


def _pp_tree(tree) -> str:
    match tree:
        case Leaf(obj, val):
            return f"e({obj}, {val})"
        case Node(op, _, param, _, children):
            kids = ", ".join(_pp_tree(c) for c in children)
            return f"do({op}, {param}, [{kids}])"
        case Coerce(r, child):
            return f"coerce({r}, {_pp_tree(child)})"
    return repr(tree)


def cmd_conform(args) -> int:
    bundle = _load(args.file)
    report = run_conformance(bundle, seed=args.seed, count=args.count,
                             depth=args.depth, max_steps=args.max_steps)
    if args.json_report:
        print(json.dumps(report.to_json(), sort_keys=True))
    else:
        for result in report.results:
            print(result.line())
    return 0 if report.ok else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cateff",
        description="Category-graded effect programs: type/grade checking, "
                    "small-step evaluation, term-tree denotations and "
                    "metatheory conformance.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="type- and grade-check every program")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", help="evaluate every program")
    p.add_argument("file")
    p.add_argument("--trace", action="store_true",
                   help="print every configuration with its grade")
    p.add_argument("--max-steps", type=int, default=_default_max_steps())
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("denote", help="print the term tree of every program")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_denote)

    p = sub.add_parser("conform", help="run the metatheory conformance suite")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--json-report", action="store_true")
    p.add_argument("--max-steps", type=int, default=_default_max_steps())
    p.set_defaults(fn=cmd_conform)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
