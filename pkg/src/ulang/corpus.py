"""Example programs with recorded outcomes, and the helpers to check them.

Each ``NAME.ul`` under the corpus directory has a sidecar
``NAME.expected.json`` holding some of these keys:

``type``     pretty-printed type of ``main``
``value``    pretty-printed final value
``decoded``  the final value as plain JSON (see :func:`decode`)
``outcome``  ``"value"`` or ``"out_of_fuel"``
``stats``    counters that must match exactly
``error``    ``{"code": ..., "headline": ...}`` for programs that must not typecheck
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ast import (
    EMPTY_CTX, UFold, UInj, UMu, UPair, UProd, USum, UTVar, UUnitT, UUnitV, alpha_eq,
    unfold_umu, utype_ftv,
)
from .errors import ULError
from .eval import DEFAULT_FUEL, OutOfFuel, RunResult, Value, run
from .parser import SourceFile, elaborate, elaborate_definitions, parse
from .pretty import pretty

ORACLE_FUEL_RATIO = 10


def default_root() -> Path:
    """The corpus directory: ``$ULANG_CORPUS`` or ``corpus/`` next to the source tree."""
    env = os.environ.get("ULANG_CORPUS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "corpus"


# ---------------------------------------------------------------------------
# Checking whole files
# ---------------------------------------------------------------------------


def check_source(sf: SourceFile) -> list:
    """Typecheck every definition and ``main``; return ``[(name, type), ...]``.

    Template parameters of ``ldef`` are checked as free L type variables.
    Raises the first diagnostic found.
    """
    from .typecheck_l import typecheck_l_surface
    from .typecheck_u import typecheck_u

    out = []
    for d in elaborate_definitions(sf):
        if d.lang == "U":
            ty = typecheck_u(EMPTY_CTX, d.body)
        else:
            ctx = EMPTY_CTX
            for p in d.params:
                ctx = ctx.add_ltyvar(p)
            ty, _ = typecheck_l_surface(ctx, d.body)
        out.append((d.name, ty))
    if sf.main is not None:
        out.append(("main", typecheck_u(EMPTY_CTX, elaborate(sf))))
    return out


def main_type(sf: SourceFile, main=None):
    from .typecheck_u import typecheck_u

    return typecheck_u(EMPTY_CTX, elaborate(sf, main))


# ---------------------------------------------------------------------------
# Plain-data views of U values
# ---------------------------------------------------------------------------


def _nat_shape(ty) -> bool:
    """``mu n. unit + n``"""
    return (isinstance(ty, UMu) and isinstance(ty.body, USum) and isinstance(ty.body.left, UUnitT)
            and ty.body.right == UTVar(ty.var))


def _list_shape(ty):
    """Return the element type if ``ty`` is ``mu l. unit + a * l`` with ``a`` closed in ``l``."""
    if not (isinstance(ty, UMu) and isinstance(ty.body, USum)):
        return None
    left, right = ty.body.left, ty.body.right
    if not (isinstance(left, UUnitT) and isinstance(right, UProd) and right.right == UTVar(ty.var)):
        return None
    if ty.var in utype_ftv(right.left):
        return None
    return right.left


def decode(v, ty):
    """Turn a closed U value into JSON data, guided by its type.

    Naturals become ints, lists become JSON lists, pairs become two-element
    lists, unit becomes ``None`` and other sums become ``{"inl": x}`` or
    ``{"inr": x}``.  Anything else (functions, other recursive types) is
    rendered with the pretty-printer.
    """
    if isinstance(ty, UUnitT) and isinstance(v, UUnitV):
        return None
    if _nat_shape(ty):
        n = 0
        while isinstance(v, UFold) and isinstance(v.body, UInj) and v.body.index == 1:
            n += 1
            v = v.body.body
        return n
    elem = _list_shape(ty)
    if elem is not None:
        items = []
        while isinstance(v, UFold) and isinstance(v.body, UInj) and v.body.index == 1:
            items.append(decode(v.body.body.left, elem))
            v = v.body.body.right
        return items
    if isinstance(ty, UProd) and isinstance(v, UPair):
        return [decode(v.left, ty.left), decode(v.right, ty.right)]
    if isinstance(ty, USum) and isinstance(v, UInj):
        side = ty.left if v.index == 0 else ty.right
        return {("inl" if v.index == 0 else "inr"): decode(v.body, side)}
    return pretty(v)


def encode(data, ty):
    """Inverse of :func:`decode` on the first-order shapes it understands."""
    if isinstance(ty, UUnitT):
        return UUnitV()
    if _nat_shape(ty):
        sty = unfold_umu(ty)
        v = UFold(ty, UInj(0, sty, UUnitV()))
        for _ in range(int(data)):
            v = UFold(ty, UInj(1, sty, v))
        return v
    elem = _list_shape(ty)
    if elem is not None:
        sty = unfold_umu(ty)
        v = UFold(ty, UInj(0, sty, UUnitV()))
        for item in reversed(list(data)):
            v = UFold(ty, UInj(1, sty, UPair(encode(item, elem), v)))
        return v
    if isinstance(ty, UProd):
        return UPair(encode(data[0], ty.left), encode(data[1], ty.right))
    if isinstance(ty, USum):
        (key, body), = data.items()
        index = 0 if key == "inl" else 1
        return UInj(index, ty, encode(body, ty.left if index == 0 else ty.right))
    raise ValueError(f"cannot encode {data!r} at {pretty(ty)}")


# ---------------------------------------------------------------------------
# Corpus programs
# ---------------------------------------------------------------------------


@dataclass
class Program:
    name: str
    path: Path
    expected: dict

    @property
    def source(self) -> str:
        return self.path.read_text(encoding="utf-8")

    @property
    def ill_typed(self) -> bool:
        return "error" in self.expected

    def parse(self) -> SourceFile:
        return parse(self.source)


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".expected.json")


def load(path) -> Program:
    path = Path(path)
    side = sidecar_path(path)
    expected = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    rel = path.stem if path.parent.name != "ill" else f"ill/{path.stem}"
    return Program(rel, path, expected)


def programs(root=None) -> list:
    root = Path(root) if root is not None else default_root()
    return [load(p) for p in sorted(root.rglob("*.ul"))]


def find(name: str, root=None) -> Program:
    for prog in programs(root):
        if prog.name == name:
            return prog
    raise KeyError(name)


def diagnose(sf_or_text) -> Optional[ULError]:
    """The first diagnostic for a source text or parsed file, or None if it checks."""
    try:
        sf = parse(sf_or_text) if isinstance(sf_or_text, str) else sf_or_text
        check_source(sf)
    except ULError as err:
        return err
    return None


def stats_dict(result: RunResult) -> dict:
    out = {}
    for line in result.stats.as_lines():
        key, _, value = line.partition("=")
        out[key] = int(value)
    return out


def differential(expr, fuel: int = DEFAULT_FUEL, direct: Optional[RunResult] = None) -> list:
    """Compare a closed U program with its translation; return a list of problems."""
    from .funtrans import funtrans_expr

    if direct is None:
        direct = run(expr, fuel)
    oracle = run(funtrans_expr(expr), fuel * ORACLE_FUEL_RATIO)
    problems = []
    d_done, o_done = isinstance(direct.outcome, Value), isinstance(oracle.outcome, Value)
    if d_done != o_done:
        problems.append(f"termination differs: direct {_outcome_name(direct)}, "
                        f"oracle {_outcome_name(oracle)}")
    elif d_done and not alpha_eq(direct.value, oracle.value):
        problems.append(f"values differ: direct {pretty(direct.value)}, oracle {pretty(oracle.value)}")
    for r, who in ((direct, "direct"), (oracle, "oracle")):
        if not isinstance(r.outcome, (Value, OutOfFuel)):
            problems.append(f"{who} run is stuck: {r.outcome.diagnostic}")
    return problems


def _outcome_name(result: RunResult) -> str:
    o = result.outcome
    if isinstance(o, Value):
        return "value"
    if isinstance(o, OutOfFuel):
        return "out_of_fuel"
    return "stuck"


@dataclass
class CaseResult:
    name: str
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


@dataclass
class CorpusReport:
    cases: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)

    def lines(self) -> list:
        out = []
        for c in self.cases:
            out.append(f"{'ok  ' if c.ok else 'FAIL'} {c.name}")
            out.extend(f"     {p}" for p in c.problems)
        return out


def check_program(prog: Program, fuel: int = DEFAULT_FUEL) -> CaseResult:
    """Parse, round-trip, typecheck, run and cross-check one corpus program."""
    from .funtrans import funtrans_expr
    from .typecheck_u import typecheck_u

    res = CaseResult(prog.name)
    exp = prog.expected
    try:
        sf = prog.parse()
        again = parse(sf.render())
        if not _same_source(sf, again):
            res.problems.append("pretty-printed source does not re-parse to the same program")
    except ULError as err:
        res.problems.append(f"parse failed: {err.headline()}")
        return res

    err = diagnose(sf)
    if prog.ill_typed:
        if err is None:
            res.problems.append(f"expected {exp['error']['code']} but the program typechecks")
        elif err.headline() != exp["error"]["headline"]:
            res.problems.append(f"diagnostic {err.headline()!r} != {exp['error']['headline']!r}")
        return res
    if err is not None:
        res.problems.append(f"unexpected diagnostic: {err.headline()}")
        return res

    expr = elaborate(sf)
    ty = typecheck_u(EMPTY_CTX, expr)
    if "type" in exp and pretty(ty) != exp["type"]:
        res.problems.append(f"type {pretty(ty)} != {exp['type']}")
    result = run(expr, fuel)
    if "outcome" in exp and _outcome_name(result) != exp["outcome"]:
        res.problems.append(f"outcome {_outcome_name(result)} != {exp['outcome']}")
    if result.value is not None:
        if "value" in exp and pretty(result.value) != exp["value"]:
            res.problems.append("final value differs from the recorded pretty-print")
        if "decoded" in exp and not alpha_eq(result.value, encode(exp["decoded"], ty)):
            res.problems.append(f"decoded value {decode(result.value, ty)!r} != {exp['decoded']!r}")
    got = stats_dict(result)
    for key, want in exp.get("stats", {}).items():
        if got.get(key, 0) != want:
            res.problems.append(f"stat {key}={got.get(key, 0)} != {want}")

    translated = funtrans_expr(expr)
    try:
        tty = typecheck_u(EMPTY_CTX, translated)
        if pretty(tty) != pretty(ty):
            res.problems.append(f"translation has type {pretty(tty)}, not {pretty(ty)}")
    except ULError as err:
        res.problems.append(f"translation does not typecheck: {err.headline()}")
    res.problems.extend(differential(expr, fuel, direct=result))
    return res


def _same_source(a: SourceFile, b: SourceFile) -> bool:
    if a.main is not None and not alpha_eq(a.main, b.main):
        return False
    if len(a.items) != len(b.items):
        return False
    for x, y in zip(a.items, b.items):
        if (x.name, x.lang, x.params) != (y.name, y.lang, y.params):
            return False
        if not alpha_eq(x.body, y.body) and x.body != y.body:
            return False
    return True


def corpus_suite(root=None, fuel: int = DEFAULT_FUEL) -> CorpusReport:
    """Check every corpus program against its sidecar."""
    return CorpusReport([check_program(p, fuel) for p in programs(root)])


def record(prog: Program, fuel: int = DEFAULT_FUEL) -> dict:
    """Compute a fresh sidecar for ``prog`` (used when adding programs)."""
    sf = prog.parse()
    err = diagnose(sf)
    if err is not None:
        return {"error": {"code": err.code, "headline": err.headline()}}
    expr = elaborate(sf)
    ty = main_type(sf)
    result = run(expr, fuel)
    out = {"type": pretty(ty), "outcome": _outcome_name(result)}
    if result.value is not None:
        out["decoded"] = decode(result.value, ty)
        out["value"] = pretty(result.value)
    out["stats"] = stats_dict(result)
    return out
