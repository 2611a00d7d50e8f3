"""Small-step evaluation of mixed U/L programs.

The top level is a U expression.  Every ``UL`` boundary and every ``share``
node owns its own store, so an L configuration ``<σ, e>`` is represented by
the store attached to the innermost enclosing boundary or share.  Evaluation
is call-by-value, left to right.

A :class:`Machine` holds the fuel, the location supply and the statistics of
one evaluation.  Deliberately broken evaluator variants ("mutants") can be
switched on to check that the property suites notice them.
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    EMPTY, EMPTY_STORE, UL, Configuration, Empty, Full, LApp, LBoxE, LCase, LCopy, LFold, LFree,
    LInj, LLam, LLetPair, LLetUnit, LLoc, LLumpOp, LLumpVal, LNew, LPair, LPhase, LShare, LU,
    LUnboxE, LUnfold, LUnitV, LUnlumpOp, Store, StoreOverlap, UApp, UCase, UFold, UFst, UInj,
    ULam, ULetUnit, UPair, USnd, UTApp, UTLam, UUnfold, L_UNITV, all_locations, freshen,
    rebuild, subst, subst_ty,
)
from .errors import StuckError, ULError

DEFAULT_FUEL = 100_000

MUTANTS = ("no_freshen", "bad_copy_split", "skip_conversion", "fold_noncancel")

#: Every rule name the evaluator can report, for coverage accounting.
U_RULES = ("u-fst", "u-snd", "u-let-unit", "u-beta", "u-case", "u-unfold-fold", "u-tbeta",
           "ul-exit")
L_RULES = ("l-let-pair", "l-let-unit", "l-beta", "l-case", "l-unfold-fold", "l-new", "l-free",
           "l-box", "l-unbox", "copy-unit", "copy-pair", "copy-inj", "copy-fold", "copy-fun",
           "copy-share", "copy-loc-empty", "copy-loc-full", "copy-lump", "lu-enter", "unlump",
           "lump", "phase-exit")
ALL_RULES = U_RULES + L_RULES

_L_UNARY = frozenset({LUnfold, LNew, LFree, LBoxE, LUnboxE, LCopy, LUnlumpOp, LLumpOp})
_COPY_RULES = frozenset(r for r in L_RULES if r.startswith("copy-"))
_BOUNDARY_RULES = frozenset({"ul-exit", "lu-enter", "unlump", "lump"})


@dataclass
class Stats:
    steps: int = 0
    new_allocs: int = 0
    frees: int = 0
    copies: int = 0
    boundary_crossings: int = 0
    pair_allocs: int = 0
    rules: Counter = field(default_factory=Counter)
    phases: dict = field(default_factory=dict)

    def as_lines(self) -> list:
        lines = [f"{k}={getattr(self, k)}" for k in
                 ("steps", "new_allocs", "frees", "copies", "boundary_crossings", "pair_allocs")]
        for name in sorted(self.phases):
            for k, v in sorted(self.phases[name].items()):
                lines.append(f"{k}({name})={v}")
        return lines

    def phase(self, name: str) -> Counter:
        return self.phases.get(name, Counter())


# --- step results -----------------------------------------------------------


@dataclass(frozen=True)
class Stepped:
    state: object


@dataclass(frozen=True)
class Value:
    value: object


@dataclass(frozen=True)
class OutOfFuel:
    state: object = None


@dataclass(frozen=True)
class Stuck:
    diagnostic: str
    state: object = None


@dataclass
class RunResult:
    outcome: object  # Value | OutOfFuel | Stuck
    steps: int
    stats: Stats

    @property
    def value(self):
        return self.outcome.value if isinstance(self.outcome, Value) else None

    @property
    def terminated(self) -> bool:
        return isinstance(self.outcome, Value)


class _Stuck(Exception):
    pass


def _ensure_recursion_limit(n: int = 20000) -> None:
    if sys.getrecursionlimit() < n:
        sys.setrecursionlimit(n)


class Machine:
    """One evaluation: fuel, a monotone location supply, statistics and an optional trace."""

    def __init__(self, fuel: int = DEFAULT_FUEL, mutants=(), trace: Optional[list] = None,
                 first_loc: int = 1):
        unknown = set(mutants) - set(MUTANTS)
        if unknown:
            raise ValueError(f"unknown mutants: {sorted(unknown)}")
        self.fuel = fuel
        self.mutants = frozenset(mutants)
        self.stats = Stats()
        self.trace = trace
        self._next_loc = first_loc
        self._phase: list = []
        self._path: list = []
        self._layer_store: Store = EMPTY_STORE
        _ensure_recursion_limit()

    # -- bookkeeping --------------------------------------------------------

    def fresh_loc(self) -> int:
        loc = self._next_loc
        self._next_loc += 1
        return loc

    def reserve_locations(self, e) -> None:
        """Make the supply start above every location already present in ``e``."""
        locs = config_locations(e) if isinstance(e, Configuration) else all_locations(e)
        if locs:
            self._next_loc = max(self._next_loc, max(locs) + 1)

    def _fire(self, rule: str) -> None:
        st = self.stats
        st.rules[rule] += 1
        events = {}
        if rule == "l-new":
            st.new_allocs += 1
            events["new_allocs"] = 1
        elif rule == "l-free":
            st.frees += 1
            events["frees"] = 1
        if rule in _COPY_RULES:
            st.copies += 1
            events["copies"] = 1
        if rule in _BOUNDARY_RULES:
            st.boundary_crossings += 1
            events["boundary_crossings"] = 1
        if self._phase:
            ph = st.phases.setdefault(self._phase[-1], Counter())
            ph["steps"] += 1
            ph.setdefault("new_allocs", 0)
            ph.setdefault("frees", 0)
            for k, v in events.items():
                ph[k] += v
        if self.trace is not None:
            self.trace.append({
                "step": st.steps + 1,
                "rule": rule,
                "position": "/".join(self._path) or "top",
                "store_size": len(self._layer_store),
                "allocs": st.new_allocs,
            })

    def _pair_done(self) -> None:
        self.stats.pair_allocs += 1
        if self._phase:
            self.stats.phases.setdefault(self._phase[-1], Counter())["pair_allocs"] += 1

    def _into(self, label: str):
        self._path.append(label)

    def _out(self):
        self._path.pop()

    # -- U ------------------------------------------------------------------

    def step_u(self, e):
        """One call-by-value step of a closed, non-value U expression."""
        t = type(e)
        if t is UApp:
            if not e.fn.is_value:
                return UApp(self._sub_u(e.fn, "fn"), e.arg)
            if not e.arg.is_value:
                return UApp(e.fn, self._sub_u(e.arg, "arg"))
            if type(e.fn) is not ULam:
                raise _Stuck(f"application of a non-function: {e.fn!r}")
            self._fire("u-beta")
            return subst(e.fn.body, e.fn.var, e.arg)
        if t is UPair:
            if not e.left.is_value:
                out = UPair(self._sub_u(e.left, "left"), e.right)
            else:
                out = UPair(e.left, self._sub_u(e.right, "right"))
            if out.is_value:
                self._pair_done()
            return out
        if t is UFst or t is USnd:
            if not e.body.is_value:
                return t(self._sub_u(e.body, "body"))
            if type(e.body) is not UPair:
                raise _Stuck("projection from a non-pair")
            self._fire("u-fst" if t is UFst else "u-snd")
            return e.body.left if t is UFst else e.body.right
        if t is ULetUnit:
            if not e.bound.is_value:
                return ULetUnit(self._sub_u(e.bound, "bound"), e.body)
            self._fire("u-let-unit")
            return e.body
        if t is UInj:
            return UInj(e.index, e.ty, self._sub_u(e.body, "body"))
        if t is UCase:
            if not e.scrut.is_value:
                return UCase(self._sub_u(e.scrut, "scrut"), e.lvar, e.lbody, e.rvar, e.rbody)
            v = e.scrut
            if type(v) is not UInj:
                raise _Stuck("case on a non-injection")
            self._fire("u-case")
            if v.index == 0:
                return subst(e.lbody, e.lvar, v.body)
            return subst(e.rbody, e.rvar, v.body)
        if t is UFold:
            return UFold(e.ty, self._sub_u(e.body, "body"))
        if t is UUnfold:
            if not e.body.is_value:
                return UUnfold(self._sub_u(e.body, "body"))
            if type(e.body) is not UFold:
                raise _Stuck("unfold of a non-fold")
            self._fire("u-unfold-fold")
            return e.body if "fold_noncancel" in self.mutants else e.body.body
        if t is UTApp:
            if not e.body.is_value:
                return UTApp(self._sub_u(e.body, "body"), e.ty)
            if type(e.body) is not UTLam:
                raise _Stuck("type application of a non-abstraction")
            self._fire("u-tbeta")
            return subst_ty(e.body.body, e.body.var, e.ty)
        if t is UL:
            if not e.body.is_value:
                self._into("UL")
                saved = self._layer_store
                try:
                    store, body = self.step_l(e.store, e.body)
                finally:
                    self._layer_store = saved
                    self._out()
                return UL(store, body)
            v = e.body
            if e.store or type(v) is not LShare or v.store or type(v.body) is not LLumpVal:
                raise _Stuck("UL boundary reached a value that is not a shared lump")
            self._fire("ul-exit")
            return v.body.value
        raise _Stuck(f"no U rule applies to {type(e).__name__}")

    def _sub_u(self, e, label):
        self._into(label)
        try:
            return self.step_u(e)
        finally:
            self._out()

    # -- L ------------------------------------------------------------------

    def step_l(self, store: Store, e):
        """One step of the configuration ``<store, e>``; returns the new store and term."""
        self._layer_store = store
        t = type(e)
        if t is LApp:
            if not e.fn.is_value:
                store, fn = self._sub_l(store, e.fn, "fn")
                return store, LApp(fn, e.arg)
            if not e.arg.is_value:
                store, arg = self._sub_l(store, e.arg, "arg")
                return store, LApp(e.fn, arg)
            if type(e.fn) is not LLam:
                raise _Stuck("application of a non-function")
            self._fire("l-beta")
            return store, subst(e.fn.body, e.fn.var, e.arg)
        if t is LPair:
            if not e.left.is_value:
                store, left = self._sub_l(store, e.left, "left")
                return store, LPair(left, e.right)
            store, right = self._sub_l(store, e.right, "right")
            return store, LPair(e.left, right)
        if t is LLetPair:
            if not e.bound.is_value:
                store, bound = self._sub_l(store, e.bound, "bound")
                return store, LLetPair(e.lvar, e.rvar, bound, e.body)
            v = e.bound
            if type(v) is not LPair:
                raise _Stuck("pair-let on a non-pair")
            self._fire("l-let-pair")
            # the components are closed, so sequential substitution is simultaneous
            return store, subst(subst(e.body, e.lvar, v.left), e.rvar, v.right)
        if t is LLetUnit:
            if not e.bound.is_value:
                store, bound = self._sub_l(store, e.bound, "bound")
                return store, LLetUnit(bound, e.body)
            self._fire("l-let-unit")
            return store, e.body
        if t is LInj:
            store, body = self._sub_l(store, e.body, "body")
            return store, LInj(e.index, e.ty, body)
        if t is LCase:
            if not e.scrut.is_value:
                store, scrut = self._sub_l(store, e.scrut, "scrut")
                return store, LCase(scrut, e.lvar, e.lbody, e.rvar, e.rbody)
            v = e.scrut
            if type(v) is not LInj:
                raise _Stuck("case on a non-injection")
            self._fire("l-case")
            if v.index == 0:
                return store, subst(e.lbody, e.lvar, v.body)
            return store, subst(e.rbody, e.rvar, v.body)
        if t is LFold:
            store, body = self._sub_l(store, e.body, "body")
            return store, LFold(e.ty, body)
        if t is LShare:
            # congruence: the body runs in the share's own store
            self._into("share")
            try:
                local, body = self.step_l(e.store, e.body)
            finally:
                self._out()
                self._layer_store = store
            return store, LShare(local, body)
        if t is LU:
            if not e.body.is_value:
                self._into("LU")
                try:
                    body = self.step_u(e.body)
                finally:
                    self._out()
                    self._layer_store = store
                return store, LU(body)
            self._fire("lu-enter")
            return store, LShare(EMPTY_STORE, LLumpVal(e.body))
        if t is LPhase:
            if e.body.is_value:
                self._fire("phase-exit")
                return store, e.body
            self._phase.append(e.name)
            try:
                store, body = self._sub_l(store, e.body, "phase")
            finally:
                self._phase.pop()
            return store, LPhase(e.name, body)
        if t in _L_UNARY:
            if not e.body.is_value:
                store, body = self._sub_l(store, e.body, "body")
                return store, rebuild(e, [body])
            return self._redex_l(store, e)
        raise _Stuck(f"no L rule applies to {t.__name__}")

    def _sub_l(self, store, e, label):
        self._into(label)
        try:
            return self.step_l(store, e)
        finally:
            self._out()
            self._layer_store = store

    def _redex_l(self, store: Store, e):
        t = type(e)
        v = getattr(e, "body", None)
        if t is LUnfold:
            if type(v) is not LFold:
                raise _Stuck("unfold of a non-fold")
            self._fire("l-unfold-fold")
            return store, (v if "fold_noncancel" in self.mutants else v.body)
        if t is LNew:
            if type(v) is not LUnitV:
                raise _Stuck("new of a non-unit")
            loc = self.fresh_loc()
            self._fire("l-new")
            return store.with_cell(loc, EMPTY), LLoc(loc)
        if t is LFree:
            if type(v) is not LLoc or not isinstance(store.get(v.loc), Empty):
                raise _Stuck("free of something other than an empty location")
            self._fire("l-free")
            return store.without((v.loc,)), L_UNITV
        if t is LBoxE:
            if type(v) is not LPair or type(v.left) is not LLoc:
                raise _Stuck("box of something other than (location, value)")
            loc, content = v.left.loc, v.right
            if not isinstance(store.get(loc), Empty):
                raise _Stuck(f"box into non-empty location #{loc}")
            owned = content.locs
            local = store.restrict(owned)
            self._fire("l-box")
            return store.without(owned).with_cell(loc, Full(content, local)), LLoc(loc)
        if t is LUnboxE:
            if type(v) is not LLoc or not isinstance(store.get(v.loc), Full):
                raise _Stuck("unbox of something other than a full location")
            slot = store.get(v.loc)
            self._fire("l-unbox")
            return _join(store.with_cell(v.loc, EMPTY), slot.local), LPair(v, slot.value)
        if t is LCopy:
            return self._copy(store, v)
        if t is LUnlumpOp:
            if type(v) is not LShare or v.store or type(v.body) is not LLumpVal:
                raise _Stuck("unlump of something other than a shared lump")
            self._fire("unlump")
            if "skip_conversion" in self.mutants:
                return store, v
            from .interop import u_to_l

            return store, u_to_l(v.body.value, e.ty, self.fresh_loc)
        if t is LLumpOp:
            self._fire("lump")
            if "skip_conversion" in self.mutants:
                return store, v
            from .interop import l_to_u

            return store, LShare(EMPTY_STORE, LLumpVal(l_to_u(v, e.ty)))
        raise _Stuck(f"no L rule applies to {t.__name__}")

    def _copy(self, store: Store, v):
        if type(v) is not LShare:
            raise _Stuck("copy of a non-shared value")
        sigma, w = v.store, v.body
        t = type(w)
        if t is LUnitV:
            self._fire("copy-unit")
            return store, L_UNITV
        if t is LPair:
            self._fire("copy-pair")
            if "bad_copy_split" in self.mutants:
                left, right = sigma, EMPTY_STORE
            else:
                left, right = sigma.restrict(w.left.locs), sigma.restrict(w.right.locs)
            return store, LPair(LCopy(LShare(left, w.left)), LCopy(LShare(right, w.right)))
        if t is LInj:
            self._fire("copy-inj")
            return store, LInj(w.index, w.ty, LCopy(LShare(sigma, w.body)))
        if t is LFold:
            self._fire("copy-fold")
            return store, LFold(w.ty, LCopy(LShare(sigma, w.body)))
        if t is LLam:
            self._fire("copy-fun")
            if "no_freshen" not in self.mutants:
                sigma, w = freshen(sigma, w, self.fresh_loc)
            return _join(store, sigma), w
        if t is LShare:
            self._fire("copy-share")
            return store, w
        if t is LLoc:
            slot = sigma.get(w.loc)
            if isinstance(slot, Empty):
                self._fire("copy-loc-empty")
                return store, LNew(L_UNITV)
            if isinstance(slot, Full):
                self._fire("copy-loc-full")
                return store, LBoxE(LPair(LNew(L_UNITV), LCopy(LShare(slot.local, slot.value))))
            raise _Stuck(f"copy of unbound location #{w.loc}")
        if t is LLumpVal:
            self._fire("copy-lump")
            return store, w
        raise _Stuck(f"copy of an unexpected shared value {t.__name__}")

    # -- drivers ------------------------------------------------------------

    def step(self, e):
        """One step of a U program or an L configuration, as a StepResult."""
        try:
            if isinstance(e, Configuration):
                if e.expr.is_value:
                    return Value(e)
                store, expr = self.step_l(e.store, e.expr)
                nxt = Configuration(store, expr)
            else:
                if e.is_value:
                    return Value(e)
                nxt = self.step_u(e)
        except _Stuck as err:
            return Stuck(str(err), e)
        except (StoreOverlap, ULError) as err:
            return Stuck(str(err), e)
        finally:
            self._path.clear()
            self._phase.clear()
        self.stats.steps += 1
        return Stepped(nxt)

    def run(self, e) -> RunResult:
        """Evaluate a closed U program (or an L configuration) until a value, stuck or out of fuel."""
        self.reserve_locations(e)
        state = e
        start = self.stats.steps
        for _ in range(self.fuel):
            res = self.step(state)
            if not isinstance(res, Stepped):
                return RunResult(res, self.stats.steps - start, self.stats)
            state = res.state
        res = self.step(state) if _is_final(state) else OutOfFuel(state)
        return RunResult(res, self.stats.steps - start, self.stats)


def _join(a: Store, b: Store) -> Store:
    return a.join(b)


def _is_final(state) -> bool:
    return (state.expr if isinstance(state, Configuration) else state).is_value


def config_locations(config: Configuration) -> set:
    """Every location mentioned anywhere in a configuration, bound or free."""
    return all_locations(config.expr) | all_locations(LShare(config.store, L_UNITV))


def run(e, fuel: int = DEFAULT_FUEL, mutants=(), trace: Optional[list] = None) -> RunResult:
    """Evaluate ``e`` with a fresh machine."""
    return Machine(fuel=fuel, mutants=mutants, trace=trace).run(e)


def step_l(config: Configuration, machine: Optional[Machine] = None) -> Configuration:
    """One step of an L configuration; raises StuckError when no rule applies."""
    m = machine or _machine_for(config)
    res = m.step(config)
    if isinstance(res, Stuck):
        raise StuckError(res.diagnostic)
    if isinstance(res, Value):
        return config
    return res.state


def step_u(e, machine: Optional[Machine] = None):
    m = machine or _machine_for(e)
    res = m.step(e)
    if isinstance(res, Stuck):
        raise StuckError(res.diagnostic)
    if isinstance(res, Value):
        return e
    return res.state


def _machine_for(x) -> Machine:
    m = Machine()
    m.reserve_locations(x)
    return m


def write_trace(records: list, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def trace_lines(records: list) -> list:
    return [f"step {r['step']}: {r['rule']} @ {r['position']}" for r in records]
