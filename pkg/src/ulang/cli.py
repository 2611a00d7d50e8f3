"""Command-line entry point: ``ulang check|run|translate|meta``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .errors import ULError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VIOLATION = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse, but usage errors become exceptions so ``main`` can return 64."""

    def error(self, message):
        raise _UsageError(message)


def _color(stream) -> bool:
    env = os.environ.get("UL_COLOR")
    if env in ("0", "1"):
        return env == "1"
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, code: str, stream) -> str:
    return f"\x1b[{code}m{text}\x1b[0m" if _color(stream) else text


def report_error(err: ULError, path: Optional[str] = None, stream=None) -> None:
    """Print a diagnostic: one headline line, then a short explanation."""
    stream = stream or sys.stdout
    prefix = f"{path}: " if path else ""
    print(prefix + _paint(err.headline(), "31;1", stream), file=stream)
    para = err.explanation
    if err.where:
        para += f" In: {err.where}"
    print("  " + para, file=stream)


def _build_parser() -> argparse.ArgumentParser:
    from .eval import DEFAULT_FUEL

    p = _Parser(prog="ulang", description="Check, run and translate UL programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="typecheck a file and print the type of each definition")
    c.add_argument("file")

    r = sub.add_parser("run", help="evaluate main")
    r.add_argument("file")
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    r.add_argument("--trace", metavar="PATH", help="write one JSON record per step to PATH")
    r.add_argument("--stats", action="store_true", help="print resource counters")

    t = sub.add_parser("translate", help="print main after the functional translation")
    t.add_argument("file")

    m = sub.add_parser("meta", help="run the property suites")
    m.add_argument("--samples", type=int, default=None)
    m.add_argument("--seed", default="0")
    m.add_argument("--props", default=",".join(_props()))
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--summary", metavar="PATH", help="write a JSON summary to PATH")
    return p


def _props():
    from .testkit import PROPERTIES

    return PROPERTIES


def _load(path: str):
    from .parser import parse

    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return parse(text)


def cmd_check(args) -> int:
    from .corpus import check_source
    from .pretty import pretty

    try:
        results = check_source(_load(args.file))
    except ULError as err:
        report_error(err, args.file)
        return EXIT_FAILURE
    for name, ty in results:
        print(f"{name} : {pretty(ty)}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .corpus import check_source, decode, main_type
    from .eval import OutOfFuel, Value, run, trace_lines, write_trace
    from .parser import elaborate
    from .pretty import pretty

    if args.fuel <= 0:
        raise _UsageError("--fuel must be positive")
    try:
        sf = _load(args.file)
        check_source(sf)
        program = elaborate(sf)
    except ULError as err:
        report_error(err, args.file)
        return EXIT_FAILURE
    trace: Optional[list] = [] if args.trace else None
    result = run(program, args.fuel, trace=trace)
    if trace is not None:
        for line in trace_lines(trace):
            print(line)
        write_trace(trace, args.trace)
    outcome = result.outcome
    if isinstance(outcome, Value):
        print(pretty(outcome.value))
        shown = decode(outcome.value, main_type(sf))
        if not isinstance(shown, str):
            print("decoded: " + json.dumps(shown))
        code = EXIT_OK
    elif isinstance(outcome, OutOfFuel):
        print(f"out of fuel after {result.steps} steps")
        code = EXIT_FAILURE
    else:
        print(f"stuck: {outcome.diagnostic}")
        code = EXIT_FAILURE
    if args.stats:
        for line in result.stats.as_lines():
            print(line)
    return code


def cmd_translate(args) -> int:
    from .corpus import check_source
    from .funtrans import funtrans_expr
    from .parser import elaborate
    from .pretty import pretty

    try:
        sf = _load(args.file)
        check_source(sf)
        translated = funtrans_expr(elaborate(sf))
    except ULError as err:
        report_error(err, args.file)
        return EXIT_FAILURE
    print(f"main = {pretty(translated)};")
    return EXIT_OK


def cmd_meta(args) -> int:
    from .testkit import PROPERTIES, run_properties, write_summary

    props = [p.strip() for p in args.props.split(",") if p.strip()]
    unknown = [p for p in props if p not in PROPERTIES]
    if unknown:
        raise _UsageError(f"unknown property {unknown[0]!r}; choose from {', '.join(PROPERTIES)}")
    if args.samples is not None and args.samples <= 0:
        raise _UsageError("--samples must be positive")
    reports = run_properties(props, args.samples, args.seed, workers=args.workers)
    for rep in reports:
        status = _paint("ok", "32", sys.stdout) if rep.ok else _paint("FAIL", "31;1", sys.stdout)
        print(f"[{status}] {rep.text()}")
    if args.summary:
        write_summary(reports, args.summary)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VIOLATION


_COMMANDS = {"check": cmd_check, "run": cmd_run, "translate": cmd_translate, "meta": cmd_meta}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"ulang: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
