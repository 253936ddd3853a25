"""Command-line front end: ``llfp check | translate | decode | normalize``."""

from __future__ import annotations

import argparse
import os
import shlex
import shutil
import sys
from pathlib import Path

from .encoding import EncodingError, InvariantViolation, NotGood, decode_source, translate_source
from .kernel import CheckError, run_directives
from .oracles import ExternalOracle, default_env
from .parser import CheckItem, DeclItem, NormalizeItem, ParseError, PredItem, parse_file, print_file, print_term
from .reduction import DEFAULT_FUEL

EXIT_OK, EXIT_CHECK, EXIT_PENDING, EXIT_PARSE, EXIT_INTERNAL = 0, 1, 2, 3, 4


_RANK = {EXIT_OK: 0, EXIT_PENDING: 1, EXIT_CHECK: 2, EXIT_PARSE: 3, EXIT_INTERNAL: 4}


def _worse(a: int, b: int) -> int:
    return a if _RANK[a] >= _RANK[b] else b


def resolve_executable(name: str) -> str | None:
    """Find an oracle executable on ``LLFP_ORACLE_PATH``, then on ``PATH``."""
    if os.sep in name and Path(name).exists():
        return name
    for d in os.environ.get("LLFP_ORACLE_PATH", "").split(os.pathsep):
        if d and (Path(d) / name).exists():
            return str(Path(d) / name)
    return shutil.which(name)


def oracle_argv(command: str) -> list[str]:
    parts = shlex.split(command)
    if not parts:
        raise ValueError("empty oracle command")
    exe = resolve_executable(parts[0])
    if exe is None:
        raise ValueError(f"oracle executable {parts[0]} not found")
    if exe.endswith(".py") and not os.access(exe, os.X_OK):
        return [sys.executable, exe, *parts[1:]]
    return [exe, *parts[1:]]


def build_env(args):
    env = default_env(args.oracle_timeout)
    for binding in args.oracle or []:
        pred, sep, cmd = binding.partition("=")
        if not sep or not pred:
            raise ValueError(f"--oracle expects PRED=EXECUTABLE, got {binding!r}")
        env.register(pred, ExternalOracle(oracle_argv(cmd)))
    return env


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _label(item) -> str:
    match item:
        case DeclItem(name):
            return name
        case PredItem(name):
            return f"pred {name}"
        case CheckItem():
            return "#" + item.form
        case NormalizeItem():
            return "#normalize"
    return "item"


def cmd_check(args) -> int:
    status = EXIT_OK
    env = build_env(args)
    try:
        for path in args.paths:
            try:
                src = parse_file(_read(path))
            except ParseError as exc:
                print(f"{path}:{exc.line}:{exc.col}: parse error: {exc.code}: {exc.message}")
                status = _worse(status, EXIT_PARSE)
                continue
            reports = run_directives(src, None if args.lf else env, args.fuel, lf=args.lf)
            for r in reports:
                it = r.item
                where = f"{path}:{it.line}:{it.col}"
                if isinstance(it, (DeclItem, PredItem)) and r.as_expected and not args.verbose:
                    continue
                if r.as_expected:
                    if r.ok:
                        extra = ""
                        if r.value is not None:
                            extra = " = " + print_term(r.value)
                        print(f"{where}: ok {_label(it)}{extra}")
                    else:
                        print(f"{where}: ok {_label(it)} (failed as expected: {r.error.code})")
                else:
                    if r.ok:
                        print(f"{where}: FAIL {_label(it)}: expected {it.expect_fail}, but it checked")
                        code = EXIT_CHECK
                    else:
                        print(f"{where}: FAIL {_label(it)}: {r.error.code}: {r.error.message}")
                        code = EXIT_PENDING if r.error.code == "verification-pending" else EXIT_CHECK
                    status = _worse(status, code)
                if args.trace:
                    for e in r.trace:
                        v = e.verdict.kind + (f" ({e.verdict.reason})" if e.verdict.reason else "")
                        names = e.context.names()
                        print(
                            f"  oracle {e.pred}: {print_term(e.witness, names)} : "
                            f"{print_term(e.witness_ty, names)} -> {v}"
                        )
    finally:
        env.close()
    return status


def cmd_translate(args) -> int:
    env = build_env(args)
    try:
        src = parse_file(_read(args.input))
        lf = translate_source(src, env, args.fuel)
    except ParseError as exc:
        print(f"{args.input}:{exc.line}:{exc.col}: parse error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_PARSE
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (CheckError, EncodingError) as exc:
        print(f"{args.input}: {exc}", file=sys.stderr)
        return EXIT_PENDING if getattr(exc, "code", "") == "verification-pending" else EXIT_CHECK
    finally:
        env.close()
    _write(args.output, print_file(lf.items))
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        src = parse_file(_read(args.input))
        out = decode_source(src)
    except ParseError as exc:
        print(f"{args.input}:{exc.line}:{exc.col}: parse error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_PARSE
    except NotGood as exc:
        print(f"{args.input}: not in the image of the encoding: {exc}", file=sys.stderr)
        return EXIT_CHECK
    _write(args.output, print_file(out.items))
    return EXIT_OK


def cmd_normalize(args) -> int:
    from .parser import parse_term
    from .reduction import FuelExhausted, normalize

    try:
        src = parse_file(_read(args.path))
        if args.expr is not None:
            t = parse_term(args.expr, src.signature, predicates=src.predicates)
            print(print_term(normalize(t, args.fuel)))
            return EXIT_OK
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FuelExhausted as exc:
        print(f"fuel-exhausted: {exc}", file=sys.stderr)
        return EXIT_CHECK
    env = build_env(args)
    status = EXIT_OK
    try:
        for r in run_directives(src, env, args.fuel):
            if isinstance(r.item, NormalizeItem):
                if r.ok:
                    print(print_term(r.value))
                else:
                    print(f"{args.path}:{r.item.line}:{r.item.col}: {r.error}")
                    status = EXIT_CHECK
    finally:
        env.close()
    return status


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llfp", description="LLFP proof checker")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="reduction step budget")
        p.add_argument("--oracle-timeout", type=float, default=5000, metavar="MS", help="per-query oracle budget")
        p.add_argument("--oracle", action="append", metavar="PRED=EXE", help="bind a predicate to an external oracle")

    p = sub.add_parser("check", help="check files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--lf", action="store_true", help="plain LF: reject every lock construct")
    p.add_argument("--trace", action="store_true", help="print oracle calls")
    p.add_argument("-v", "--verbose", action="store_true", help="also report declarations")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("translate", help="encode an LLFP file into LF")
    p.add_argument("input")
    p.add_argument("output")
    common(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("decode", help="decode an encoded LF file back to LLFP")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("normalize", help="print normal forms of #normalize directives")
    p.add_argument("path")
    p.add_argument("-e", "--expr", help="normalize this term against the file's signature instead")
    common(p)
    p.set_defaults(func=cmd_normalize)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"llfp: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except RecursionError:
        print("llfp: internal invariant violated: recursion too deep", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
