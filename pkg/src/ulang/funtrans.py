"""Functional translation of mixed programs into pure U.

Linear state disappears: an empty cell becomes ``()``, a full cell becomes
the pair ``((), content)``, ``share``/``copy`` and both boundaries are erased,
and the store of a configuration is substituted for its locations.  The
translation is type directed because U has no pair pattern: ``let (x, y) = e``
needs the type of ``e`` to annotate the lambdas it expands into.

``lump``/``unlump`` are the identity unless the L type mentions ``Box``:
``Box t`` translates to ``unit * [t]`` while its compatible U type is that of
``t``, so a coercion inserting or dropping the ``()`` component is generated.
"""

from __future__ import annotations

from typing import Optional

from .ast import (
    EMPTY_CTX, EMPTY_STORE, UL, Configuration, Empty, Full, LApp, LBang, LBox, LBox0, LBoxE,
    LCase, LCopy, LFix, LFold, LFree, LInj, LInst, LLam, LLetPair, LLetUnit, LLoc, LLolli,
    LLumpOp, LLumpT, LLumpVal, LMu, LNew, LOne, LPair, LPhase, LPlus, LShare, LTensor, LTVar, LU,
    LUnboxE, LUnfold, LUnitV, LUnlumpOp, LVar, LVarEntry, MixedContext, Store, U_UNIT, U_UNITV,
    UApp, UCase, UFix, UFold, UForall, UFst, UFun, UHole, UInj, ULam, ULetUnit, UMu, UPair,
    UProd, USnd, USum, UTApp, UTLam, UTVar, UUnfold, UUnitV, UVar, LExprBase, alpha_eq, children,
    fresh_name, rebuild, subst_utype, unfold_lmu, unfold_umu,
)
from .errors import NotTypable

#: Suffix that turns an L type variable into a reserved U type variable name.
LTYVAR_SUFFIX = "$L"


def loc_var(loc: int) -> str:
    """Reserved U variable standing for a location that no enclosing store defines."""
    return f"loc${loc}"


def funtrans_type(t):
    """Translate an L type to the U type of its pure counterpart."""
    c = type(t)
    if c is LOne or c is LBox0:
        return U_UNIT
    if c is LTensor:
        return UProd(funtrans_type(t.left), funtrans_type(t.right))
    if c is LLolli:
        return UFun(funtrans_type(t.arg), funtrans_type(t.res))
    if c is LPlus:
        return USum(funtrans_type(t.left), funtrans_type(t.right))
    if c is LMu:
        return UMu(t.var + LTYVAR_SUFFIX, funtrans_type(t.body))
    if c is LTVar:
        return UTVar(t.name + LTYVAR_SUFFIX)
    if c is LBang:
        return funtrans_type(t.body)
    if c is LBox:
        return UProd(U_UNIT, funtrans_type(t.body))
    if c is LLumpT:
        return t.utype
    raise TypeError(f"not an L type: {t!r}")


def _has_box(t, seen=()) -> bool:
    c = type(t)
    if c is LBox:
        return True
    if c in (LTensor, LPlus):
        return _has_box(t.left) or _has_box(t.right)
    if c is LLolli:
        return _has_box(t.arg) or _has_box(t.res)
    if c in (LBang, LMu):
        return _has_box(t.body)
    return False


# ---------------------------------------------------------------------------
# Coercions between a compatible U type and the translation of an L type
# ---------------------------------------------------------------------------


class _Coercions:
    """Build U functions converting between ``recover_u(!s)`` and ``funtrans_type(s)``."""

    def __init__(self):
        self.rec: dict = {}

    def make(self, s, inward: bool):
        """Coercion term, or None when it is the identity.

        ``inward`` converts from the compatible U type to the translated type.
        """
        if not _has_box(s):
            return None
        return self._co(s, inward)

    def _types(self, s, inward):
        from .interop import recover_u

        src, dst = recover_u(LBang(s)), funtrans_type(s)
        return (src, dst) if inward else (dst, src)

    def _co(self, s, inward: bool):
        key = (s, inward)
        if key in self.rec:
            return UVar(self.rec[key])
        if not _has_box(s):
            return None
        src, dst = self._types(s, inward)
        v = fresh_name("v")
        c = type(s)
        if c is LBang:
            return self._co(s.body, inward)
        if c is LBox:
            inner = self._apply(self._co(s.body, inward), UVar(v) if inward else USnd(UVar(v)))
            body = UPair(U_UNITV, inner) if inward else inner
            return ULam(v, src, body)
        if c is LTensor:
            left = self._apply(self._co(s.left, inward), UFst(UVar(v)))
            right = self._apply(self._co(s.right, inward), USnd(UVar(v)))
            return ULam(v, src, UPair(left, right))
        if c is LPlus:
            a, b = fresh_name("a"), fresh_name("b")
            left = UInj(0, dst, self._apply(self._co(s.left, inward), UVar(a)))
            right = UInj(1, dst, self._apply(self._co(s.right, inward), UVar(b)))
            return ULam(v, src, UCase(UVar(v), a, left, b, right))
        if c is LLolli:
            x = fresh_name("x")
            arg = self._apply(self._co(s.arg, not inward), UVar(x))
            res = self._apply(self._co(s.res, inward), UApp(UVar(v), arg))
            return ULam(v, src, ULam(x, dst.arg, res))
        if c is LMu:
            from .parser import fix_u

            name = fresh_name("co")
            self.rec[key] = name
            body = self._apply(self._co(unfold_lmu(s), inward), UUnfold(UVar(v)))
            fn = ULam(v, src, UFold(dst, body))
            del self.rec[key]
            return fix_u(name, UFun(src, dst), fn)
        raise NotTypable(f"no coercion for {s!r}")

    @staticmethod
    def _apply(co, arg):
        return arg if co is None else UApp(co, arg)


# ---------------------------------------------------------------------------
# The translation
# ---------------------------------------------------------------------------


class Translator:
    """Typed translation; each method returns the translated term and the source type."""

    def __init__(self):
        self.coercions = _Coercions()
        self.hole_ctx: Optional[MixedContext] = None

    # -- U --------------------------------------------------------------------

    def u(self, ctx: MixedContext, e):
        t = type(e)
        if t is UVar:
            ent = ctx.lookup(e.name)
            if ent is None:
                raise NotTypable(f"unbound variable {e.name}")
            return e, ent.ty
        if t is UUnitV:
            return e, U_UNIT
        if t is UPair:
            l, lt = self.u(ctx, e.left)
            r, rt = self.u(ctx, e.right)
            return UPair(l, r), UProd(lt, rt)
        if t is UFst or t is USnd:
            b, bt = self.u(ctx, e.body)
            return t(b), (bt.left if t is UFst else bt.right)
        if t is ULetUnit:
            b, _ = self.u(ctx, e.bound)
            body, ty = self.u(ctx, e.body)
            return ULetUnit(b, body), ty
        if t is ULam:
            body, ty = self.u(ctx.add_u(e.var, e.ty), e.body)
            return ULam(e.var, e.ty, body), UFun(e.ty, ty)
        if t is UApp:
            f, ft = self.u(ctx, e.fn)
            a, _ = self.u(ctx, e.arg)
            return UApp(f, a), ft.res
        if t is UInj:
            b, _ = self.u(ctx, e.body)
            return UInj(e.index, e.ty, b), e.ty
        if t is UCase:
            s, st = self.u(ctx, e.scrut)
            lb, lt = self.u(ctx.add_u(e.lvar, st.left), e.lbody)
            rb, _ = self.u(ctx.add_u(e.rvar, st.right), e.rbody)
            return UCase(s, e.lvar, lb, e.rvar, rb), lt
        if t is UFold:
            b, _ = self.u(ctx, e.body)
            return UFold(e.ty, b), e.ty
        if t is UUnfold:
            b, bt = self.u(ctx, e.body)
            return UUnfold(b), unfold_umu(bt)
        if t is UTLam:
            b, bt = self.u(ctx.add_utyvar(e.var), e.body)
            return UTLam(e.var, b), UForall(e.var, bt)
        if t is UTApp:
            b, bt = self.u(ctx, e.body)
            return UTApp(b, e.ty), subst_utype(bt.body, bt.var, e.ty)
        if t is UL:
            b, bt = self.l(ctx, e.store, e.body)
            return b, bt.body.utype
        if t is UHole:
            self.hole_ctx = ctx
            return e, e.ty
        if t is UFix:
            b, _ = self.u(ctx.add_u(e.var, e.ty), e.body)
            return UFix(e.var, e.ty, b), e.ty
        raise NotTypable(f"cannot translate {t.__name__}")

    # -- L --------------------------------------------------------------------

    def l(self, ctx: MixedContext, store: Store, e):
        t = type(e)
        if t is LVar:
            ent = ctx.lookup(e.name)
            if not isinstance(ent, LVarEntry):
                raise NotTypable(f"unbound L variable {e.name}")
            return UVar(e.name), ent.ty
        if t is LUnitV:
            return U_UNITV, LOne()
        if t is LPair:
            l, lt = self.l(ctx, store, e.left)
            r, rt = self.l(ctx, store, e.right)
            return UPair(l, r), LTensor(lt, rt)
        if t is LLetPair:
            b, bt = self.l(ctx, store, e.bound)
            inner = ctx.add_l(e.lvar, bt.left).add_l(e.rvar, bt.right)
            body, ty = self.l(inner, store, e.body)
            t1, t2 = funtrans_type(bt.left), funtrans_type(bt.right)
            p = fresh_name("p")
            split = UApp(UApp(ULam(e.lvar, t1, ULam(e.rvar, t2, body)), UFst(UVar(p))),
                         USnd(UVar(p)))
            return UApp(ULam(p, UProd(t1, t2), split), b), ty
        if t is LLetUnit:
            b, _ = self.l(ctx, store, e.bound)
            body, ty = self.l(ctx, store, e.body)
            return ULetUnit(b, body), ty
        if t is LLam:
            body, ty = self.l(ctx.add_l(e.var, e.ty), store, e.body)
            return ULam(e.var, funtrans_type(e.ty), body), LLolli(e.ty, ty)
        if t is LApp:
            f, ft = self.l(ctx, store, e.fn)
            a, _ = self.l(ctx, store, e.arg)
            return UApp(f, a), ft.res
        if t is LInj:
            b, _ = self.l(ctx, store, e.body)
            return UInj(e.index, funtrans_type(e.ty), b), e.ty
        if t is LCase:
            s, st = self.l(ctx, store, e.scrut)
            lb, lt = self.l(ctx.add_l(e.lvar, st.left), store, e.lbody)
            rb, _ = self.l(ctx.add_l(e.rvar, st.right), store, e.rbody)
            return UCase(s, e.lvar, lb, e.rvar, rb), lt
        if t is LFold:
            b, _ = self.l(ctx, store, e.body)
            return UFold(funtrans_type(e.ty), b), e.ty
        if t is LUnfold:
            b, bt = self.l(ctx, store, e.body)
            return UUnfold(b), unfold_lmu(bt)
        if t is LShare:
            b, bt = self.l(ctx, e.store, e.body)
            return b, LBang(bt)
        if t is LCopy:
            b, bt = self.l(ctx, store, e.body)
            return b, bt.body
        if t is LNew or t is LFree:
            b, _ = self.l(ctx, store, e.body)
            return ULetUnit(b, U_UNITV), (LBox0() if t is LNew else LOne())
        if t is LBoxE or t is LUnboxE:
            b, bt = self.l(ctx, store, e.body)
            out = UPair(U_UNITV, USnd(b))
            if t is LBoxE:
                return out, LBox(bt.right)
            return out, LTensor(LBox0(), bt.body)
        if t is LLoc:
            slot = store.get(e.loc)
            if isinstance(slot, Empty):
                return U_UNITV, LBox0()
            if isinstance(slot, Full):
                v, vt = self.l(ctx, slot.local, slot.value)
                return UPair(U_UNITV, v), LBox(vt)
            raise NotTypable(f"location #{e.loc} is not defined by any enclosing store")
        if t is LLumpVal:
            v, vt = self.u(ctx, e.value)
            return v, LLumpT(vt)
        if t is LU:
            b, bt = self.u(ctx, e.body)
            return b, LBang(LLumpT(bt))
        if t is LUnlumpOp or t is LLumpOp:
            from .interop import recover_u

            b, _ = self.l(ctx, store, e.body)
            co = self.coercions.make(e.ty.body, inward=t is LUnlumpOp) \
                if isinstance(e.ty, LBang) else None
            out = b if co is None else UApp(co, b)
            if t is LUnlumpOp:
                return out, e.ty
            return out, LBang(LLumpT(recover_u(e.ty)))
        if t is LPhase:
            return self.l(ctx, store, e.body)
        if t is LFix or t is LInst:
            raise NotTypable("fix and template instances must be elaborated before translation")
        raise NotTypable(f"cannot translate {t.__name__}")


def funtrans_expr(x, ctx: MixedContext = EMPTY_CTX):
    """Translate a U expression, an L expression or a configuration into pure U."""
    tr = Translator()
    if isinstance(x, Configuration):
        return tr.l(ctx, x.store, x.expr)[0]
    if isinstance(x, LExprBase):
        return tr.l(ctx, EMPTY_STORE, x)[0]
    return tr.u(ctx, x)[0]


def funtrans_typed(x, ctx: MixedContext = EMPTY_CTX):
    """Like ``funtrans_expr`` but also return the source type (U or L)."""
    tr = Translator()
    if isinstance(x, Configuration):
        return tr.l(ctx, x.store, x.expr)
    if isinstance(x, LExprBase):
        return tr.l(ctx, EMPTY_STORE, x)
    return tr.u(ctx, x)


def translate_context(ctx: MixedContext) -> MixedContext:
    """Translate the L entries of a context; U entries are kept."""
    out = ctx
    for ent in ctx.entries:
        if isinstance(ent, LVarEntry):
            out = out.add_u(ent.name, funtrans_type(ent.ty))
    return out


# ---------------------------------------------------------------------------
# Compositionality
# ---------------------------------------------------------------------------


def plug(context, filler):
    """Replace every hole of ``context`` with ``filler`` (variables may be captured)."""
    if isinstance(context, UHole):
        return filler
    kids = children(context)
    new = [plug(k, filler) for k in kids]
    out = rebuild(context, new) if kids else context
    if isinstance(out, (UL, LShare)) and out.store:
        out = type(out)(_plug_store(out.store, filler), out.body)
    return out


def _plug_store(store: Store, filler) -> Store:
    cells = {}
    for loc, slot in store.items():
        if isinstance(slot, Full):
            slot = Full(plug(slot.value, filler), _plug_store(slot.local, filler))
        cells[loc] = slot
    return Store(cells)


def check_compositionality(context, filler, ctx: MixedContext = EMPTY_CTX) -> bool:
    """Compare the translation of ``C[e]`` with ``[C]`` plugged with ``[e]``."""
    whole = funtrans_expr(plug(context, filler), ctx)
    tr = Translator()
    translated_ctx = tr.u(ctx, context)[0]
    hole_ctx = tr.hole_ctx if tr.hole_ctx is not None else ctx
    part = Translator().u(hole_ctx, filler)[0]
    return alpha_eq(whole, plug(translated_ctx, part))
