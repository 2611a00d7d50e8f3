"""Compatibility between U and L types, and the conversions it licenses.

``compat(env, τ, t)`` holds when values of ``τ`` and of ``t`` convert into each
other.  Only ``!``-headed L types take part.  The relation is syntax-directed
on ``t``, so ``recover_u`` computes the unique ``τ`` for a given ``t``.

Recursive types are compared by introducing a fresh U variable for every U
binder crossed.  A lump payload therefore never refers to a bound variable of
the surrounding U type, and ``τ`` is determined by ``t``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterable, Optional

from .ast import (
    EMPTY_STORE, UL, Full, LApp, LBang, LBox, LCopy, LFold, LInj, LLam, LLolli, LLoc, LLumpOp,
    LLumpT, LLumpVal, LMu, LOne, LPair, LPlus, LShare, LTensor, LTVar, LU, LUnitV, LUnlumpOp,
    LVar, Store, UApp, UFold, UFun, UInj, ULam, UMu, UPair, UProd, USum, UTVar, UUnitT,
    UUnitV, UVar, U_UNIT, U_UNITV, fresh_name, ltype_uftv, subst_utype, unfold_lmu, utype_eq,
    utype_ftv,
)
from .errors import NotInImage, ShapeMismatch

CompatEnv = tuple  # of (U var, L var) pairs, innermost last


def _lookup(env: Iterable, beta: str) -> Optional[str]:
    for a, b in reversed(tuple(env)):
        if b == beta:
            return a
    return None


def compat(env, tau, t) -> bool:
    """Decide ``env ⊢ τ ◃▹ t``."""
    if not isinstance(t, LBang):
        return False
    return _compat_bang(tuple(env), tau, t.body)


def _compat_bang(env: tuple, tau, s) -> bool:
    """Decide ``τ ◃▹ !s`` by recursion on ``s``."""
    c = type(s)
    if c is LOne:
        return isinstance(tau, UUnitT)
    if c is LTensor:
        return (isinstance(tau, UProd) and _compat_bang(env, tau.left, s.left)
                and _compat_bang(env, tau.right, s.right))
    if c is LPlus:
        return (isinstance(tau, USum) and _compat_bang(env, tau.left, s.left)
                and _compat_bang(env, tau.right, s.right))
    if c is LLolli:
        return (isinstance(tau, UFun) and isinstance(s.arg, LBang) and isinstance(s.res, LBang)
                and _compat_bang(env, tau.arg, s.arg.body)
                and _compat_bang(env, tau.res, s.res.body))
    if c is LLumpT:
        bound = {a for a, _ in env}
        return not (utype_ftv(s.utype) & bound) and utype_eq(tau, s.utype)
    if c is LBang or c is LBox:
        return _compat_bang(env, tau, s.body)
    if c is LMu:
        if not isinstance(tau, UMu):
            return False
        alpha = fresh_name("a")
        body = subst_utype(tau.body, tau.var, UTVar(alpha))
        return _compat_bang(env + ((alpha, s.var),), body, s.body)
    if c is LTVar:
        alpha = _lookup(env, s.name)
        return alpha is not None and isinstance(tau, UTVar) and tau.name == alpha
    return False


@lru_cache(maxsize=4096)
def recover_u(t):
    """The unique U type compatible with ``t``; raises NotInImage if there is none."""
    if not isinstance(t, LBang):
        raise NotInImage(f"{_show(t)} is not a !-type, so no U type is compatible with it")
    return _recover(t.body, ())


def _recover(s, env: tuple):
    c = type(s)
    if c is LOne:
        return U_UNIT
    if c is LTensor:
        return UProd(_recover(s.left, env), _recover(s.right, env))
    if c is LPlus:
        return USum(_recover(s.left, env), _recover(s.right, env))
    if c is LLolli:
        if not (isinstance(s.arg, LBang) and isinstance(s.res, LBang)):
            raise NotInImage(f"function type {_show(s)} needs !-typed argument and result")
        return UFun(_recover(s.arg.body, env), _recover(s.res.body, env))
    if c is LLumpT:
        clash = utype_ftv(s.utype) & {a for _, a in env}
        if clash:
            raise NotInImage(f"lump payload mentions recursive variable {sorted(clash)[0]}")
        return s.utype
    if c is LBang or c is LBox:
        return _recover(s.body, env)
    if c is LMu:
        taken = ltype_uftv(s.body) | {a for _, a in env}
        alpha = s.var if s.var not in taken else fresh_name(s.var)
        return UMu(alpha, _recover(s.body, env + ((s.var, alpha),)))
    if c is LTVar:
        for b, a in reversed(env):
            if b == s.name:
                return UTVar(a)
        raise NotInImage(f"free L type variable {s.name}")
    raise NotInImage(f"{_show(s)} has no compatible U type")


def all_compatible(t) -> list:
    """Every ``τ`` derivable for ``t`` by trying all rules (a brute-force oracle).

    Unlike ``recover_u`` this does not rely on the rules being syntax-directed:
    every rule whose conclusion can match is tried and all results are kept.
    """
    return _derive(t, ())


def _derive(t, env: tuple) -> list:
    """All ``τ`` with ``env ⊢ τ ◃▹ t`` (``env`` maps L vars to U vars)."""
    out = []
    if not isinstance(t, LBang):
        return out
    s = t.body
    # unit rule
    if isinstance(s, LOne):
        out.append(U_UNIT)
    # product, sum: premises are on !t1 and !t2
    if isinstance(s, (LTensor, LPlus)):
        ctor = UProd if isinstance(s, LTensor) else USum
        for a in _derive(LBang(s.left), env):
            for b in _derive(LBang(s.right), env):
                out.append(ctor(a, b))
    # function rule: argument and result are !t and !t'
    if isinstance(s, LLolli) and isinstance(s.arg, LBang) and isinstance(s.res, LBang):
        for a in _derive(s.arg, env):
            for b in _derive(s.res, env):
                out.append(UFun(a, b))
    # lump rule
    if isinstance(s, LLumpT) and not (utype_ftv(s.utype) & {a for _, a in env}):
        out.append(s.utype)
    # bang absorption and box transparency
    if isinstance(s, (LBang, LBox)):
        out.extend(_derive(LBang(s.body), env))
    # recursive types
    if isinstance(s, LMu):
        alpha = fresh_name("a")
        for body in _derive(LBang(s.body), env + ((s.var, alpha),)):
            out.append(UMu(alpha, body))
    # variables
    if isinstance(s, LTVar):
        for b, a in reversed(env):
            if b == s.name:
                out.append(UTVar(a))
                break
    return out


def distinct_types(types: Iterable) -> list:
    out: list = []
    for ty in types:
        if not any(utype_eq(ty, seen) for seen in out):
            out.append(ty)
    return out


# ---------------------------------------------------------------------------
# Value conversions
# ---------------------------------------------------------------------------


def _show(x) -> str:
    from .pretty import pretty

    return pretty(x)


def _default_supply() -> Callable[[], int]:
    return itertools.count(1).__next__


def u_to_l(v, t, supply: Optional[Callable[[], int]] = None):
    """Convert the closed U value ``v`` to the L value of type ``t`` (a ``share`` form)."""
    if not isinstance(t, LBang):
        raise ShapeMismatch(f"conversion target {_show(t)} is not a !-type")
    store, w = _to_l(v, t.body, supply or _default_supply())
    return LShare(store, w)


def _to_l(v, s, supply):
    """Return ``(σ, w)`` such that ``share σ w`` is the L value of type ``!s`` for ``v``."""
    c = type(s)
    if c is LOne and isinstance(v, UUnitV):
        return EMPTY_STORE, LUnitV()
    if c is LTensor and isinstance(v, UPair):
        s1, w1 = _to_l(v.left, s.left, supply)
        s2, w2 = _to_l(v.right, s.right, supply)
        return s1.join(s2), LPair(w1, w2)
    if c is LPlus and isinstance(v, UInj):
        st, w = _to_l(v.body, s.left if v.index == 0 else s.right, supply)
        return st, LInj(v.index, s, w)
    if c is LLumpT:
        return EMPTY_STORE, LLumpVal(v)
    if c is LBang:
        st, w = _to_l(v, s.body, supply)
        return EMPTY_STORE, LShare(st, w)
    if c is LBox:
        st, w = _to_l(v, s.body, supply)
        loc = supply()
        return Store({loc: Full(w, st)}), LLoc(loc)
    if c is LMu and isinstance(v, UFold):
        st, w = _to_l(v.body, unfold_lmu(s), supply)
        return st, LFold(s, w)
    if c is LLolli and isinstance(v, ULam):
        if not (isinstance(s.arg, LBang) and isinstance(s.res, LBang)):
            raise ShapeMismatch(f"function type {_show(s)} is not in the compatible image")
        x = fresh_name("x")
        call = UApp(v, UL(EMPTY_STORE, LLumpOp(s.arg, LVar(x))))
        return EMPTY_STORE, LLam(x, s.arg, LUnlumpOp(s.res, LU(call)))
    raise ShapeMismatch(f"cannot convert {_show(v)} to !{_show(s)}")


def l_to_u(w, t):
    """Convert the closed L value ``w : t`` (a ``share`` form in the empty store) to U."""
    if not (isinstance(t, LBang) and isinstance(w, LShare)):
        raise ShapeMismatch(f"expected a shared value at {_show(t)}, found {_show(w)}")
    return _to_u(w.store, w.body, t.body)


def _to_u(store: Store, w, s):
    c = type(s)
    if c is LOne and isinstance(w, LUnitV):
        return U_UNITV
    if c is LTensor and isinstance(w, LPair):
        left = _to_u(store.restrict(w.left.locs), w.left, s.left)
        right = _to_u(store.restrict(w.right.locs), w.right, s.right)
        return UPair(left, right)
    if c is LPlus and isinstance(w, LInj):
        body = _to_u(store, w.body, s.left if w.index == 0 else s.right)
        return UInj(w.index, recover_u(LBang(s)), body)
    if c is LLumpT and isinstance(w, LLumpVal):
        return w.value
    if c is LBang and isinstance(w, LShare):
        return _to_u(w.store, w.body, s.body)
    if c is LBox and isinstance(w, LLoc):
        slot = store.get(w.loc)
        if not isinstance(slot, Full):
            raise ShapeMismatch(f"location #{w.loc} is empty where a Box value was expected")
        return _to_u(slot.local, slot.value, s.body)
    if c is LMu and isinstance(w, LFold):
        return UFold(recover_u(LBang(s)), _to_u(store, w.body, unfold_lmu(s)))
    if c is LLolli and isinstance(w, LLam):
        if not (isinstance(s.arg, LBang) and isinstance(s.res, LBang)):
            raise ShapeMismatch(f"function type {_show(s)} is not in the compatible image")
        x = fresh_name("x")
        call = LApp(LCopy(LShare(store, w)), LUnlumpOp(s.arg, LU(UVar(x))))
        body = LLumpOp(s.res, call)
        return ULam(x, recover_u(s.arg), UL(EMPTY_STORE, body))
    raise ShapeMismatch(f"cannot convert {_show(w)} from !{_show(s)}")
