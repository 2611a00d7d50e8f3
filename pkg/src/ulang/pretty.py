"""Concrete-syntax rendering of types, expressions, stores and configurations.

The output is accepted by ``ulang.parser`` and re-parses to an alpha-equivalent
tree.  Precedence levels mirror the grammar: binders (``fun``, ``let``, ``case``)
extend as far right as possible, application is left associative and prefix
operators take an atomic operand.
"""

from __future__ import annotations

from .ast import (
    UL, Configuration, Empty, Expr, LApp, LBang, LBox, LBox0, LBoxE, LCase, LCopy,
    LExprBase, LFix, LFold, LFree, LInj, LInst, LLam, LLetPair, LLetUnit, LLoc, LLolli,
    LLumpOp, LLumpT, LLumpVal, LMu, LNew, LOne, LPair, LPhase, LPlus, LShare, LTensor, LTVar,
    LU, LUnboxE, LUnfold, LUnitV, LUnlumpOp, LVar, Store, UApp, UCase, UFix, UFold, UForall,
    UFst, UFun, UHole, UInj, ULam, ULetUnit, UMu, UPair, UProd, USnd, USum, UTApp, UTLam,
    UTVar, UUnfold, UUnitT, UUnitV, UVar,
)


def _paren(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


# --- types -----------------------------------------------------------------


def utype_str(t, level: int = 0) -> str:
    """Levels: 0 arrow, 1 sum, 2 product, 3 atom."""
    if isinstance(t, UTVar):
        return t.name
    if isinstance(t, UUnitT):
        return "unit"
    if isinstance(t, UFun):
        return _paren(f"{utype_str(t.arg, 1)} -> {utype_str(t.res, 0)}", level > 0)
    if isinstance(t, USum):
        return _paren(f"{utype_str(t.left, 2)} + {utype_str(t.right, 1)}", level > 1)
    if isinstance(t, UProd):
        return _paren(f"{utype_str(t.left, 3)} * {utype_str(t.right, 2)}", level > 2)
    if isinstance(t, UMu):
        return _paren(f"mu {t.var}. {utype_str(t.body, 0)}", level > 0)
    if isinstance(t, UForall):
        return _paren(f"forall {t.var}. {utype_str(t.body, 0)}", level > 0)
    raise TypeError(f"not a U type: {t!r}")


def ltype_str(t, level: int = 0) -> str:
    """Levels: 0 lollipop, 1 sum, 2 tensor, 3 prefix, 4 atom."""
    if isinstance(t, LOne):
        return "1"
    if isinstance(t, LBox0):
        return "Box0"
    if isinstance(t, LTVar):
        return t.name
    if isinstance(t, LLumpT):
        return f"Lump({utype_str(t.utype)})"
    if isinstance(t, LLolli):
        return _paren(f"{ltype_str(t.arg, 1)} -o {ltype_str(t.res, 0)}", level > 0)
    if isinstance(t, LPlus):
        return _paren(f"{ltype_str(t.left, 2)} + {ltype_str(t.right, 1)}", level > 1)
    if isinstance(t, LTensor):
        return _paren(f"{ltype_str(t.left, 3)} * {ltype_str(t.right, 2)}", level > 2)
    if isinstance(t, LBang):
        return _paren(f"!{ltype_str(t.body, 3)}", level > 3)
    if isinstance(t, LBox):
        return _paren(f"Box {ltype_str(t.body, 3)}", level > 3)
    if isinstance(t, LMu):
        return _paren(f"mu {t.var}. {ltype_str(t.body, 0)}", level > 0)
    raise TypeError(f"not an L type: {t!r}")


# --- expressions -----------------------------------------------------------

# Levels: 0 open binder forms, 1 application / prefix operators, 2 atoms.


def store_str(s: Store) -> str:
    parts = []
    for loc in sorted(s):
        slot = s.get(loc)
        if isinstance(slot, Empty):
            parts.append(f"#{loc} := empty")
        else:
            parts.append(f"#{loc} := {store_str(slot.local)} {lexpr_str(slot.value, 0)}")
    return "{" + ", ".join(parts) + "}"


def uexpr_str(e, level: int = 0) -> str:
    if isinstance(e, UVar):
        return e.name
    if isinstance(e, UUnitV):
        return "()"
    if isinstance(e, UPair):
        return f"({uexpr_str(e.left)}, {uexpr_str(e.right)})"
    if isinstance(e, UL):
        store = f"with {store_str(e.store)} " if e.store else ""
        return f"UL {store}{{ {lexpr_str(e.body)} }}"
    if isinstance(e, UHole):
        return f"hole[{utype_str(e.ty)}]"
    if isinstance(e, ULam):
        return _paren(f"fun ({e.var} : {utype_str(e.ty)}) -> {uexpr_str(e.body)}", level > 0)
    if isinstance(e, UFix):
        return _paren(f"fix ({e.var} : {utype_str(e.ty)}) -> {uexpr_str(e.body)}", level > 0)
    if isinstance(e, UTLam):
        return _paren(f"Fun {e.var} -> {uexpr_str(e.body)}", level > 0)
    if isinstance(e, ULetUnit):
        return _paren(f"let () = {uexpr_str(e.bound)} in {uexpr_str(e.body)}", level > 0)
    if isinstance(e, UCase):
        text = (f"case {uexpr_str(e.scrut)} of {{ inl {e.lvar} -> {uexpr_str(e.lbody)}"
                f" | inr {e.rvar} -> {uexpr_str(e.rbody)} }}")
        return _paren(text, level > 0)
    if isinstance(e, UApp):
        return _paren(f"{uexpr_str(e.fn, 1)} {uexpr_str(e.arg, 2)}", level > 1)
    if isinstance(e, UTApp):
        return _paren(f"{uexpr_str(e.body, 1)} [{utype_str(e.ty)}]", level > 1)
    if isinstance(e, UFst):
        return _paren(f"fst {uexpr_str(e.body, 2)}", level > 1)
    if isinstance(e, USnd):
        return _paren(f"snd {uexpr_str(e.body, 2)}", level > 1)
    if isinstance(e, UInj):
        tag = "inl" if e.index == 0 else "inr"
        return _paren(f"{tag}[{utype_str(e.ty)}] {uexpr_str(e.body, 2)}", level > 1)
    if isinstance(e, UFold):
        return _paren(f"fold[{utype_str(e.ty)}] {uexpr_str(e.body, 2)}", level > 1)
    if isinstance(e, UUnfold):
        return _paren(f"unfold {uexpr_str(e.body, 2)}", level > 1)
    raise TypeError(f"not a U expression: {e!r}")


_L_PREFIX = {LCopy: "copy", LNew: "new", LFree: "free", LBoxE: "box", LUnboxE: "unbox",
             LUnfold: "unfold"}


def lexpr_str(e, level: int = 0) -> str:
    t = type(e)
    if t is LVar:
        return e.name
    if t is LUnitV:
        return "()"
    if t is LLoc:
        return f"#{e.loc}"
    if t is LPair:
        return f"({lexpr_str(e.left)}, {lexpr_str(e.right)})"
    if t is LU:
        return f"LU {{ {uexpr_str(e.body)} }}"
    if t is LLumpVal:
        return f"[| {uexpr_str(e.value)} |]"
    if t is LPhase:
        return f"phase {e.name} {{ {lexpr_str(e.body)} }}"
    if t is LInst:
        return f"{e.name}[{', '.join(ltype_str(x) for x in e.tys)}]"
    if t is LLam:
        return _paren(f"fun ({e.var} : {ltype_str(e.ty)}) -o {lexpr_str(e.body)}", level > 0)
    if t is LFix:
        return _paren(f"fix ({e.var} : {ltype_str(e.ty)}) -o {lexpr_str(e.body)}", level > 0)
    if t is LLetPair:
        return _paren(f"let ({e.lvar}, {e.rvar}) = {lexpr_str(e.bound)} in {lexpr_str(e.body)}",
                      level > 0)
    if t is LLetUnit:
        return _paren(f"let () = {lexpr_str(e.bound)} in {lexpr_str(e.body)}", level > 0)
    if t is LCase:
        text = (f"case {lexpr_str(e.scrut)} of {{ inl {e.lvar} -> {lexpr_str(e.lbody)}"
                f" | inr {e.rvar} -> {lexpr_str(e.rbody)} }}")
        return _paren(text, level > 0)
    if t is LApp:
        return _paren(f"{lexpr_str(e.fn, 1)} {lexpr_str(e.arg, 2)}", level > 1)
    if t in _L_PREFIX:
        return _paren(f"{_L_PREFIX[t]} {lexpr_str(e.body, 2)}", level > 1)
    if t is LShare:
        store = f"with {store_str(e.store)} " if e.store else ""
        return _paren(f"share {store}{lexpr_str(e.body, 2)}", level > 1)
    if t is LInj:
        tag = "inl" if e.index == 0 else "inr"
        return _paren(f"{tag}[{ltype_str(e.ty)}] {lexpr_str(e.body, 2)}", level > 1)
    if t is LFold:
        return _paren(f"fold[{ltype_str(e.ty)}] {lexpr_str(e.body, 2)}", level > 1)
    if t is LLumpOp:
        return _paren(f"lump[{ltype_str(e.ty)}] {lexpr_str(e.body, 2)}", level > 1)
    if t is LUnlumpOp:
        return _paren(f"unlump[{ltype_str(e.ty)}] {lexpr_str(e.body, 2)}", level > 1)
    raise TypeError(f"not an L expression: {e!r}")


def config_str(c: Configuration) -> str:
    if c.store:
        return f"with {store_str(c.store)} {lexpr_str(c.expr)}"
    return lexpr_str(c.expr)


def pretty(x) -> str:
    """Render a type, expression, store, configuration or source file."""
    from .parser import SourceFile

    if isinstance(x, SourceFile):
        return x.render()
    if isinstance(x, Configuration):
        return config_str(x)
    if isinstance(x, Store):
        return store_str(x)
    if isinstance(x, LExprBase):
        return lexpr_str(x)
    if isinstance(x, Expr):
        return uexpr_str(x)
    if isinstance(x, (UTVar, UUnitT, UProd, UFun, USum, UMu, UForall)):
        return utype_str(x)
    return ltype_str(x)
