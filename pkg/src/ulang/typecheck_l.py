"""Type checking of L expressions and configurations with linear usage tracking.

The checker is syntax-directed: instead of splitting contexts it returns the
set of linear variables and locations each subterm consumes, and the rules
check those sets for disjointness (pairs, applications, lets), equality (case
branches) or emptiness (share).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import (
    EMPTY_CTX, EMPTY_STORE, Alive, Dead, Empty, Full, LApp, LBang, LBox, LBox0, LBoxE,
    LCase, LCopy, LFix, LFold, LFree, LInj, LInst, LLam, LLetPair, LLetUnit, LLoc, LLolli,
    LLumpOp, LLumpT, LLumpVal, LMu, LNew, LOne, LPair, LPhase, LPlus, LShare, LTensor, LTVar, LU,
    LUnboxE, LUnfold, LUnitV, LUnlumpOp, LVar, LVarEntry, L_BOX0, L_ONE, MixedContext, Store,
    StoreTyping, UVarEntry, duplicable, ltype_eq, ltype_uftv, unfold_lmu,
)
from .errors import (
    AliveLocationEmpty, BranchUsageMismatch, CopyOfNonBang, DeadLocationHoldsValue, IllFormedType,
    LinearInStoredValue, LinearVariableReused, LinearVariableUnused, LocationReused, LocationUnused, NotTypable, ShareCapturesLinear,
    SharedLinearVariable, StoreMismatch, TypeMismatch, ULError, UnboundName, UnboundVariable,
)

_NONE = frozenset()


@dataclass(frozen=True)
class UsageReport:
    consumed_vars: frozenset = _NONE
    consumed_locs: frozenset = _NONE


def _show(x) -> str:
    from .pretty import pretty

    text = pretty(x)
    return text if len(text) <= 60 else text[:57] + "..."


def ctxjoin(a: MixedContext, b: MixedContext) -> MixedContext:
    """Join two contexts; a name present in both must carry the same duplicable type."""
    entries = list(a.entries)
    for ent in b.entries:
        if isinstance(ent, (UVarEntry, LVarEntry)):
            other = a.lookup(ent.name)
            if other is None:
                entries.append(ent)
                continue
            if isinstance(ent, LVarEntry) and not (isinstance(other, LVarEntry)
                                                   and duplicable(ent.ty)
                                                   and ltype_eq(ent.ty, other.ty)):
                raise SharedLinearVariable(f"{ent.name} occurs on both sides of a join", ent.name)
            if isinstance(ent, UVarEntry) and other != ent:
                raise SharedLinearVariable(f"{ent.name} has two different types", ent.name)
        elif ent not in entries:
            entries.append(ent)
    return MixedContext(entries)


# ---------------------------------------------------------------------------
# Well-formedness of L types
# ---------------------------------------------------------------------------


def check_ltype_wf(ctx: MixedContext, ty) -> None:
    bound: list = []

    def go(t):
        c = type(t)
        if c is LTVar:
            if t.name not in bound and t.name not in ctx.ltyvars:
                raise IllFormedType(f"unbound L type variable {t.name}")
        elif c is LMu:
            bound.append(t.var)
            go(t.body)
            bound.pop()
        elif c in (LTensor, LPlus):
            go(t.left)
            go(t.right)
        elif c is LLolli:
            go(t.arg)
            go(t.res)
        elif c in (LBang, LBox):
            go(t.body)
    go(ty)
    missing = [a for a in ltype_uftv(ty) if not ctx.has_utyvar(a)]
    if missing:
        raise IllFormedType(f"unbound type variable {sorted(missing)[0]} in {_show(ty)}")


# ---------------------------------------------------------------------------
# The checker
# ---------------------------------------------------------------------------


class _Checker:
    """One checking run; records the content type of every full cell it visits."""

    def __init__(self):
        self.cell_types: dict = {}

    def expect(self, kind, ty, what: str, e):
        if not isinstance(ty, kind):
            raise TypeMismatch(what, _show(ty), _show(e))
        return ty

    def same(self, want, got, e):
        if not ltype_eq(want, got):
            raise TypeMismatch(_show(want), _show(got), _show(e))

    @staticmethod
    def disjoint(e, *usages):
        vars_, locs = set(), set()
        for vs, ls in usages:
            clash = vars_ & vs
            if clash:
                x = sorted(clash)[0]
                raise LinearVariableReused(f"linear variable {x} is used more than once", _show(e))
            clash = locs & ls
            if clash:
                raise LocationReused(f"location #{min(clash)} is used more than once", _show(e))
            vars_ |= vs
            locs |= ls
        return frozenset(vars_), frozenset(locs)

    def bind(self, e, var, ty, used: frozenset, where=None):
        """Check that a linear binder was consumed and drop it from the usage set."""
        if not duplicable(ty) and var not in used:
            raise LinearVariableUnused(f"linear variable {var} is never used",
                                       _show(where if where is not None else e))
        return used - {var}

    def check_store(self, ctx, store: Store):
        """Check the contents of full cells; each must consume no linear variable."""
        for loc, slot in store.items():
            if isinstance(slot, Full):
                self.check_cell(ctx, loc, slot)

    def check_cell(self, ctx, loc, slot: Full):
        ty, vs, ls = self.check(ctx, slot.local, slot.value)
        if not slot.value.is_value:
            raise NotTypable(f"location #{loc} holds a non-value {_show(slot.value)}")
        if vs:
            raise LinearInStoredValue(
                f"value stored at #{loc} consumes linear variable {sorted(vs)[0]}")
        self.covers(slot.local, ls, slot.value)
        self.cell_types[loc] = ty
        return ty

    @staticmethod
    def covers(store: Store, used: frozenset, e):
        dom = store.domain()
        if used != dom:
            extra = dom - used
            if extra:
                raise LocationUnused(f"location #{min(extra)} is never used", _show(e))
            raise StoreMismatch(f"location #{min(used - dom)} is not in the store", _show(e))

    def check(self, ctx: MixedContext, store: Store, e):
        """Return (type, consumed linear vars, consumed locations) of ``e`` in ``store``."""
        t = type(e)
        if t is LVar:
            ent = ctx.lookup(e.name)
            if ent is None:
                raise UnboundVariable(f"unbound variable {e.name}", e.name)
            if isinstance(ent, UVarEntry):
                raise UnboundVariable(
                    f"{e.name} is a U variable and cannot be used in L code", e.name)
            return ent.ty, (_NONE if duplicable(ent.ty) else frozenset((e.name,))), _NONE
        if t is LUnitV:
            return L_ONE, _NONE, _NONE
        if t is LPair:
            lt, lv, ll = self.check(ctx, store, e.left)
            rt, rv, rl = self.check(ctx, store, e.right)
            vs, ls = self.disjoint(e, (lv, ll), (rv, rl))
            return LTensor(lt, rt), vs, ls
        if t is LLetPair:
            bt, bv, bl = self.check(ctx, store, e.bound)
            bt = self.expect(LTensor, bt, "a tensor type", e)
            if e.lvar == e.rvar:
                raise LinearVariableReused(f"pattern binds {e.lvar} twice", _show(e))
            inner = ctx.add_l(e.lvar, bt.left).add_l(e.rvar, bt.right)
            ty, vs, ls = self.check(inner, store, e.body)
            vs = self.bind(e, e.lvar, bt.left, vs)
            vs = self.bind(e, e.rvar, bt.right, vs)
            vs, ls = self.disjoint(e, (bv, bl), (vs, ls))
            return ty, vs, ls
        if t is LLetUnit:
            bt, bv, bl = self.check(ctx, store, e.bound)
            self.same(L_ONE, bt, e)
            ty, vs, ls = self.check(ctx, store, e.body)
            vs, ls = self.disjoint(e, (bv, bl), (vs, ls))
            return ty, vs, ls
        if t is LLam:
            check_ltype_wf(ctx, e.ty)
            ty, vs, ls = self.check(ctx.add_l(e.var, e.ty), store, e.body)
            return LLolli(e.ty, ty), self.bind(e, e.var, e.ty, vs), ls
        if t is LApp:
            ft, fv, fl = self.check(ctx, store, e.fn)
            ft = self.expect(LLolli, ft, "a linear function type", e)
            at, av, al = self.check(ctx, store, e.arg)
            self.same(ft.arg, at, e)
            vs, ls = self.disjoint(e, (fv, fl), (av, al))
            return ft.res, vs, ls
        if t is LInj:
            check_ltype_wf(ctx, e.ty)
            sty = self.expect(LPlus, e.ty, "a sum type annotation", e)
            got, vs, ls = self.check(ctx, store, e.body)
            self.same(sty.left if e.index == 0 else sty.right, got, e)
            return sty, vs, ls
        if t is LCase:
            st, sv, sl = self.check(ctx, store, e.scrut)
            st = self.expect(LPlus, st, "a sum type", e)
            lt, lv, ll = self.check(ctx.add_l(e.lvar, st.left), store, e.lbody)
            rt, rv, rl = self.check(ctx.add_l(e.rvar, st.right), store, e.rbody)
            lv = self.bind(e, e.lvar, st.left, lv, e.lbody)
            rv = self.bind(e, e.rvar, st.right, rv, e.rbody)
            if lv != rv or ll != rl:
                diff = sorted(lv ^ rv) or [f"#{x}" for x in sorted(ll ^ rl)]
                raise BranchUsageMismatch(
                    f"case branches consume different resources ({diff[0]})", _show(e))
            self.same(lt, rt, e)
            vs, ls = self.disjoint(e, (sv, sl), (lv, ll))
            return lt, vs, ls
        if t is LFold:
            check_ltype_wf(ctx, e.ty)
            mty = self.expect(LMu, e.ty, "a recursive type annotation", e)
            got, vs, ls = self.check(ctx, store, e.body)
            self.same(unfold_lmu(mty), got, e)
            return mty, vs, ls
        if t is LUnfold:
            got, vs, ls = self.check(ctx, store, e.body)
            return unfold_lmu(self.expect(LMu, got, "a recursive type", e)), vs, ls
        if t is LShare:
            self.check_store(ctx, e.store)
            ty, vs, ls = self.check(ctx, e.store, e.body)
            if vs:
                x = sorted(vs)[0]
                raise ShareCapturesLinear(f"share captures linear variable {x}", _show(e))
            self.covers(e.store, ls, e)
            return LBang(ty), _NONE, _NONE
        if t is LCopy:
            ty, vs, ls = self.check(ctx, store, e.body)
            if not isinstance(ty, LBang):
                raise CopyOfNonBang(f"copy needs a !-type, found {_show(ty)}", _show(e))
            return ty.body, vs, ls
        if t is LNew:
            ty, vs, ls = self.check(ctx, store, e.body)
            self.same(L_ONE, ty, e)
            return L_BOX0, vs, ls
        if t is LFree:
            ty, vs, ls = self.check(ctx, store, e.body)
            self.same(L_BOX0, ty, e)
            return L_ONE, vs, ls
        if t is LBoxE:
            ty, vs, ls = self.check(ctx, store, e.body)
            ty = self.expect(LTensor, ty, "Box0 * t", e)
            self.same(L_BOX0, ty.left, e)
            return LBox(ty.right), vs, ls
        if t is LUnboxE:
            ty, vs, ls = self.check(ctx, store, e.body)
            ty = self.expect(LBox, ty, "a Box type", e)
            return LTensor(L_BOX0, ty.body), vs, ls
        if t is LLoc:
            slot = store.get(e.loc)
            if slot is None:
                raise StoreMismatch(f"location #{e.loc} is not in the store", _show(e))
            if isinstance(slot, Empty):
                return L_BOX0, _NONE, frozenset((e.loc,))
            return LBox(self.check_cell(ctx, e.loc, slot)), _NONE, frozenset((e.loc,))
        if t is LLumpVal:
            from .typecheck_u import typecheck_u

            if not e.value.is_value:
                raise NotTypable(f"lump of a non-value {_show(e.value)}")
            return LLumpT(typecheck_u(ctx, e.value)), _NONE, _NONE
        if t is LU:
            from .typecheck_u import typecheck_u

            return LBang(LLumpT(typecheck_u(ctx, e.body))), _NONE, _NONE
        if t is LUnlumpOp or t is LLumpOp:
            from .interop import recover_u

            check_ltype_wf(ctx, e.ty)
            lumped = LBang(LLumpT(recover_u(e.ty)))
            got, vs, ls = self.check(ctx, store, e.body)
            if t is LUnlumpOp:
                self.same(lumped, got, e)
                return e.ty, vs, ls
            self.same(e.ty, got, e)
            return lumped, vs, ls
        if t is LPhase:
            return self.check(ctx, store, e.body)
        if t is LFix:
            check_ltype_wf(ctx, e.ty)
            if not (isinstance(e.ty, LBang) and isinstance(e.ty.body, LLolli)):
                raise TypeMismatch("a type !(A -o B) for fix", _show(e.ty), _show(e))
            ty, vs, ls = self.check(ctx.add_l(e.var, e.ty), EMPTY_STORE, e.body)
            if vs:
                raise ShareCapturesLinear(
                    f"fix body captures linear variable {sorted(vs)[0]}", _show(e))
            self.covers(EMPTY_STORE, ls, e)
            self.same(e.ty.body, ty, e)
            return e.ty.body, _NONE, _NONE
        if t is LInst:
            raise UnboundName(f"template {e.name} must be elaborated before checking", e.name)
        raise NotTypable(f"not an L expression: {e!r}")


def _storety(checker: _Checker, store: Store) -> StoreTyping:
    entries = {}
    for loc, slot in store.items():
        if isinstance(slot, Empty):
            entries[loc] = Dead()
        else:
            entries[loc] = Alive(EMPTY_CTX, _storety(checker, slot.local),
                                 checker.cell_types[loc])
    return StoreTyping(entries)


def _report(vs, ls) -> UsageReport:
    return UsageReport(frozenset(vs), frozenset(ls))


def check_configuration(ctx: MixedContext, store: Store, e):
    """Check ``<store, e>``: every location of ``store`` must be consumed exactly once by ``e``."""
    c = _Checker()
    ty, vs, ls = c.check(ctx, store, e)
    c.covers(store, ls, e)
    return ty, _report(vs, ls)


def typecheck_l_surface(ctx: MixedContext, e):
    """Check a surface term; returns its type and the linear variables it consumes."""
    ty, vs, ls = _Checker().check(ctx, EMPTY_STORE, e)
    if ls:
        raise StoreMismatch(f"surface term mentions location #{min(ls)}", _show(e))
    return ty, _report(vs, ls)


def typecheck_l_internal(storety: Optional[StoreTyping], ctx: MixedContext, store: Store, e):
    """Check a configuration against an optional store typing; returns (type, usage)."""
    c = _Checker()
    ty, vs, ls = c.check(ctx, store, e)
    c.covers(store, ls, e)
    if storety is not None:
        inferred = _storety(c, store)
        if inferred.domain() != storety.domain():
            raise StoreMismatch("store typing and store have different domains", _show(e))
        for loc, ent in storety.items():
            if isinstance(ent, Dead) and isinstance(store.get(loc), Full):
                raise DeadLocationHoldsValue(f"location #{loc} is declared dead but holds a value")
            if isinstance(ent, Alive) and isinstance(store.get(loc), Empty):
                raise AliveLocationEmpty(f"location #{loc} is declared alive but is empty")
        if inferred != storety:
            raise StoreMismatch("store typing does not describe the store", _show(e))
    return ty, _report(vs, ls)


def check_closed_l(ctx: MixedContext, e):
    """Surface check that additionally demands every linear variable of ``ctx`` be consumed."""
    ty, usage = typecheck_l_surface(ctx, e)
    missing = ctx.linear_vars() - usage.consumed_vars
    if missing:
        raise LinearVariableUnused(f"linear variable {sorted(missing)[0]} is never used")
    return ty


def infer_store_typing(store: Store, e, ty=None, ctx: MixedContext = EMPTY_CTX) -> StoreTyping:
    """Reconstruct the store typing that makes ``<store, e>`` well typed (at ``ty`` if given)."""
    c = _Checker()
    try:
        got, vs, ls = c.check(ctx, store, e)
        c.covers(store, ls, e)
    except ULError as err:
        raise NotTypable(f"configuration is not typable: {err.headline()}") from err
    if vs - ctx.linear_vars() or ctx.linear_vars() - vs:
        raise NotTypable("configuration does not consume exactly its linear context")
    if ty is not None and not ltype_eq(ty, got):
        raise NotTypable(f"configuration has type {_show(got)}, expected {_show(ty)}")
    return _storety(c, store)


def type_of_configuration(store: Store, e, ctx: MixedContext = EMPTY_CTX):
    """Type of a closed configuration (raises the checker's diagnostic on failure)."""
    ty, _ = check_configuration(ctx, store, e)
    return ty


def is_l_type(x) -> bool:
    return isinstance(x, (LOne, LTensor, LLolli, LPlus, LMu, LTVar, LBang, LBox, LBox0, LLumpT))
