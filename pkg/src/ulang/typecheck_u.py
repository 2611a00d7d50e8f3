"""Type checking of U expressions in a mixed context.

U rules never consume L variables.  A boundary ``UL { e }`` hands its body to
the L checker, which rejects any linear variable the body would consume.
"""

from __future__ import annotations

from .ast import (
    UL, LBang, LLumpT, MixedContext, UApp, UCase, UFix, UFold, UForall, UFst, UFun, UHole, UInj,
    ULam, ULetUnit, UMu, UPair, UProd, USnd, USum, UTApp, UTLam, UUnfold, UUnitT, UUnitV, UVar,
    LVarEntry, U_UNIT, subst_utype, unfold_umu, utype_eq, utype_ftv,
)
from .errors import (
    BoundaryTypeNotLumped, IllFormedType, NonDuplicableLinearInScope, NonValueUnderTypeAbstraction,
    TypeMismatch, UnboundName, UnboundVariable,
)


def _show(x) -> str:
    from .pretty import pretty

    text = pretty(x)
    return text if len(text) <= 60 else text[:57] + "..."


def check_utype_wf(ctx: MixedContext, ty) -> None:
    """Every free type variable of ``ty`` must be bound in ``ctx``."""
    missing = [a for a in utype_ftv(ty) if not ctx.has_utyvar(a)]
    if missing:
        raise IllFormedType(f"unbound type variable {sorted(missing)[0]} in {_show(ty)}")


def _expect(kind, ty, what: str, e):
    if not isinstance(ty, kind):
        raise TypeMismatch(what, _show(ty), _show(e))
    return ty


def typecheck_u(ctx: MixedContext, e) -> object:
    """Return the type of the U expression ``e`` under ``ctx``."""
    t = type(e)
    if t is UVar:
        ent = ctx.lookup(e.name)
        if ent is None:
            raise UnboundVariable(f"unbound variable {e.name}", e.name)
        if isinstance(ent, LVarEntry):
            raise UnboundVariable(f"{e.name} is an L variable and cannot be used in U code", e.name)
        return ent.ty
    if t is UUnitV:
        return U_UNIT
    if t is UPair:
        return UProd(typecheck_u(ctx, e.left), typecheck_u(ctx, e.right))
    if t is UFst or t is USnd:
        ty = _expect(UProd, typecheck_u(ctx, e.body), "a product type", e)
        return ty.left if t is UFst else ty.right
    if t is ULetUnit:
        ty = typecheck_u(ctx, e.bound)
        if not isinstance(ty, UUnitT):
            raise TypeMismatch("unit", _show(ty), _show(e))
        return typecheck_u(ctx, e.body)
    if t is ULam:
        check_utype_wf(ctx, e.ty)
        return UFun(e.ty, typecheck_u(ctx.add_u(e.var, e.ty), e.body))
    if t is UApp:
        fty = _expect(UFun, typecheck_u(ctx, e.fn), "a function type", e)
        aty = typecheck_u(ctx, e.arg)
        if not utype_eq(fty.arg, aty):
            raise TypeMismatch(_show(fty.arg), _show(aty), _show(e))
        return fty.res
    if t is UInj:
        check_utype_wf(ctx, e.ty)
        sty = _expect(USum, e.ty, "a sum type annotation", e)
        want = sty.left if e.index == 0 else sty.right
        got = typecheck_u(ctx, e.body)
        if not utype_eq(want, got):
            raise TypeMismatch(_show(want), _show(got), _show(e))
        return sty
    if t is UCase:
        sty = _expect(USum, typecheck_u(ctx, e.scrut), "a sum type", e)
        lt = typecheck_u(ctx.add_u(e.lvar, sty.left), e.lbody)
        rt = typecheck_u(ctx.add_u(e.rvar, sty.right), e.rbody)
        if not utype_eq(lt, rt):
            raise TypeMismatch(_show(lt), _show(rt), _show(e))
        return lt
    if t is UFold:
        check_utype_wf(ctx, e.ty)
        mty = _expect(UMu, e.ty, "a recursive type annotation", e)
        want = unfold_umu(mty)
        got = typecheck_u(ctx, e.body)
        if not utype_eq(want, got):
            raise TypeMismatch(_show(want), _show(got), _show(e))
        return mty
    if t is UUnfold:
        return unfold_umu(_expect(UMu, typecheck_u(ctx, e.body), "a recursive type", e))
    if t is UTLam:
        if not e.body.is_value:
            raise NonValueUnderTypeAbstraction(
                f"the body of Fun {e.var} must be a value: {_show(e.body)}")
        return UForall(e.var, typecheck_u(ctx.add_utyvar(e.var), e.body))
    if t is UTApp:
        check_utype_wf(ctx, e.ty)
        fty = _expect(UForall, typecheck_u(ctx, e.body), "a universal type", e)
        return subst_utype(fty.body, fty.var, e.ty)
    if t is UL:
        return delegate_boundary_ul(ctx, e)
    if t is UFix:
        check_utype_wf(ctx, e.ty)
        _expect(UFun, e.ty, "a function type for fix", e)
        got = typecheck_u(ctx.add_u(e.var, e.ty), e.body)
        if not utype_eq(got, e.ty):
            raise TypeMismatch(_show(e.ty), _show(got), _show(e))
        return e.ty
    if t is UHole:
        check_utype_wf(ctx, e.ty)
        return e.ty
    raise UnboundName(f"not a U expression: {_show(e)}")


def delegate_boundary_ul(ctx: MixedContext, e: UL):
    """Type ``UL σ e_L``: the L side must have type ``!Lump(τ)`` and consume no linear variable."""
    from .typecheck_l import check_configuration

    ty, usage = check_configuration(ctx, e.store, e.body)
    if usage.consumed_vars:
        x = sorted(usage.consumed_vars)[0]
        raise NonDuplicableLinearInScope(
            f"linear variable {x} cannot cross into U code", _show(e))
    if not (isinstance(ty, LBang) and isinstance(ty.body, LLumpT)):
        raise BoundaryTypeNotLumped(
            f"a UL boundary needs type !Lump(T), found {_show(ty)}", _show(e))
    return ty.body.utype
