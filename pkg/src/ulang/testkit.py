"""Random well-typed programs and the property drivers that test the metatheory.

The generators are type directed.  The L generator is handed the set of
linear variables the term under construction must consume, and splits that
set among subterms, so linear typing holds by construction rather than by
filtering.  Every generated artifact is still re-checked before it is used.

Each driver returns a :class:`Report`.  Samples are seeded from
``f"{seed}:{index}"``, so a run is reproducible sample by sample whatever the
batch layout.
"""

from __future__ import annotations

import itertools
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional

from .ast import (
    EMPTY, EMPTY_CTX, L_BOX0, L_ONE, L_UNITV, U_UNIT, U_UNITV, UL, Configuration,
    Empty, Full, LApp, LBang, LBox, LBox0, LBoxE, LCase, LCopy, LFold, LFree, LInj, LLam,
    LLetPair, LLetUnit, LLoc, LLolli, LLumpOp, LLumpT, LLumpVal, LMu, LNew, LOne, LPair, LPhase,
    LPlus, LShare, LTensor, LTVar, LU, LUnboxE, LUnfold, LUnitV, LUnlumpOp, LVar, LVarEntry,
    MixedContext, Store, UApp, UCase, UFold, UForall, UFst, UFun, UHole, UInj, ULam, ULetUnit,
    UMu, UPair, UProd, USnd, USum, UTApp, UTLam, UTVar, UUnfold, UUnitT, UVar, UVarEntry,
    alpha_eq, children, duplicable, ltype_eq, ltype_ftv, rebuild, unfold_lmu,
    unfold_umu, utype_eq, utype_ftv,
)
from .errors import NotInImage, ULError, Uninhabited
from .eval import ALL_RULES, DEFAULT_FUEL, Machine, Stepped, Stuck, run
from .parser import fix_l

ORACLE_FUEL_RATIO = 10

# ---------------------------------------------------------------------------
# Type pools
# ---------------------------------------------------------------------------

NAT = UMu("n", USum(U_UNIT, UTVar("n")))
BOOL = USum(U_UNIT, U_UNIT)
LIST_NAT = UMu("l", USum(U_UNIT, UProd(NAT, UTVar("l"))))

#: First-order U types: the result types of differential programs.
FIRST_ORDER = (
    U_UNIT, BOOL, UProd(U_UNIT, U_UNIT), NAT, UProd(NAT, BOOL),
    USum(U_UNIT, UProd(U_UNIT, U_UNIT)), LIST_NAT, USum(NAT, BOOL),
)

#: Twenty U types for the U generator's self-check.
U_TYPES = FIRST_ORDER + (
    UFun(U_UNIT, U_UNIT), UFun(NAT, BOOL), UFun(BOOL, UFun(BOOL, BOOL)),
    UForall("a", UFun(UTVar("a"), UTVar("a"))), UProd(UFun(U_UNIT, NAT), U_UNIT),
    UFun(UFun(U_UNIT, U_UNIT), U_UNIT), USum(UFun(BOOL, U_UNIT), U_UNIT),
    UMu("t", USum(U_UNIT, UProd(UTVar("t"), UTVar("t")))), UProd(BOOL, UProd(NAT, U_UNIT)),
    UFun(LIST_NAT, NAT), UMu("w", UFun(UTVar("w"), U_UNIT)), UFun(UProd(NAT, NAT), NAT),
)

LIN_LIST = LMu("r", LPlus(L_ONE, LBox(LTensor(L_ONE, LTVar("r")))))
_ID_FN = LBang(LLolli(L_ONE, L_ONE))

#: Target types of generated L configurations.
L_TARGETS = (
    L_ONE, LTensor(L_ONE, L_ONE), LPlus(L_ONE, L_ONE), L_BOX0, LBox(L_ONE),
    LBox(LTensor(L_ONE, L_BOX0)), LBang(L_ONE), LBang(LTensor(L_ONE, LBox(L_ONE))),
    LLumpT(U_UNIT), LBang(LLumpT(NAT)), LLolli(L_ONE, L_ONE), _ID_FN, LLolli(L_BOX0, L_ONE),
    LIN_LIST, LBang(LIN_LIST), LTensor(_ID_FN, LBox(L_ONE)), LPlus(LBox(L_ONE), L_ONE),
    LBox(LBang(LLumpT(BOOL))), LBang(LLolli(LBang(LLumpT(U_UNIT)), LBang(LLumpT(U_UNIT)))),
    LBang(LBang(L_ONE)), LBang(LLolli(LBox(L_ONE), L_ONE)), LBang(LPlus(L_BOX0, LBox(L_ONE))),
)

#: Types given to variables the L generator binds.
BINDER_TYPES = (
    L_ONE, L_BOX0, LBox(L_ONE), LTensor(L_ONE, L_ONE), LPlus(L_ONE, L_ONE), LBang(L_ONE),
    _ID_FN, LBang(LLolli(L_BOX0, L_ONE)), LBang(LLumpT(U_UNIT)), LLolli(L_ONE, L_ONE),
    LBox(L_BOX0), LIN_LIST, LBang(LBox(L_ONE)), LBang(LLolli(L_ONE, LBox(L_ONE))),
    LBang(LTensor(L_ONE, LBox(L_ONE))), LBang(LLumpT(NAT)),
)

#: Argument types for generated U applications.
_U_ARGS = (U_UNIT, BOOL, NAT, UProd(U_UNIT, U_UNIT), UFun(U_UNIT, U_UNIT))


def dischargeable(t, bound: frozenset = frozenset()) -> bool:
    """Whether a variable of type ``t`` can always be consumed by a finite term."""
    c = type(t)
    if c in (LOne, LBox0, LBang):
        return True
    if c in (LTensor, LPlus):
        return dischargeable(t.left, bound) and dischargeable(t.right, bound)
    if c is LBox:
        return dischargeable(t.body, bound)
    if c is LMu:
        return dischargeable(t.body, bound | {t.var})
    if c is LLolli:
        return not ltype_ftv(t.arg) and dischargeable(t.res, bound)
    if c is LTVar:
        return t.name in bound
    return False


def random_ltype(rng: random.Random, depth: int = 3, bound: tuple = ()) -> object:
    """A random L type whose variables are all dischargeable."""
    leaves = [L_ONE, L_BOX0, LBang(LLumpT(U_UNIT)), LBang(LLumpT(NAT))]
    leaves += [LTVar(b) for b in bound]
    if depth <= 0 or rng.random() < 0.25:
        return rng.choice(leaves)
    k = rng.randrange(7)
    if k == 0:
        return LTensor(random_ltype(rng, depth - 1, bound), random_ltype(rng, depth - 1, bound))
    if k == 1:
        return LPlus(random_ltype(rng, depth - 1, bound), random_ltype(rng, depth - 1, bound))
    if k == 2:
        return LLolli(random_ltype(rng, depth - 1), random_ltype(rng, depth - 1, bound))
    if k == 3:
        return LBang(random_ltype(rng, depth - 1))
    if k == 4:
        return LBox(random_ltype(rng, depth - 1, bound))
    if k == 5 and len(bound) < 2:
        var = f"r{len(bound)}"
        body = random_ltype(rng, depth - 1, bound + (var,))
        # keep the base case reachable so leaves exist
        return LMu(var, LPlus(L_ONE, body))
    return rng.choice(leaves)


def random_compat(rng: random.Random, tau, env: tuple = (), depth: int = 0):
    """A random ``s`` with ``τ ◃▹ !s`` (``env`` maps bound U variables to L variables)."""
    bound = {a for a, _ in env}
    core = _random_compat_core(rng, tau, env, depth)
    roll = rng.random()
    if depth < 4 and roll < 0.12:
        return LBox(core)
    if depth < 4 and roll < 0.2:
        return LBang(core)
    if not (utype_ftv(tau) & bound) and roll < 0.3:
        return LLumpT(tau)
    return core


def _random_compat_core(rng, tau, env, depth):
    c = type(tau)
    if c is UUnitT:
        return L_ONE
    if c is UProd:
        return LTensor(random_compat(rng, tau.left, env, depth + 1),
                       random_compat(rng, tau.right, env, depth + 1))
    if c is USum:
        return LPlus(random_compat(rng, tau.left, env, depth + 1),
                     random_compat(rng, tau.right, env, depth + 1))
    if c is UFun:
        return LLolli(LBang(random_compat(rng, tau.arg, env, depth + 1)),
                      LBang(random_compat(rng, tau.res, env, depth + 1)))
    if c is UMu:
        beta = f"b{len(env)}"
        return LMu(beta, random_compat(rng, tau.body, env + ((tau.var, beta),), depth + 1))
    if c is UTVar:
        for a, b in reversed(env):
            if a == tau.name:
                return LTVar(b)
    return LLumpT(tau)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _split(rng: random.Random, size: int, parts: int) -> list:
    """Split ``size - 1`` into ``parts`` non-negative budgets."""
    total = max(size - 1, 0)
    cuts = sorted(rng.randint(0, total) for _ in range(parts - 1))
    out, prev = [], 0
    for c in cuts + [total]:
        out.append(c - prev)
        prev = c
    return out


def _partition(rng: random.Random, items: frozenset, parts: int) -> list:
    out = [set() for _ in range(parts)]
    for x in sorted(items):
        out[rng.randrange(parts)].add(x)
    return [frozenset(p) for p in out]


class Gen:
    """One generation session: a random source, a name supply and the store layers being built.

    ``diverge`` is the probability of planting a divergent U term, and
    ``hole`` the probability of planting the (single) typed hole used by the
    compositionality suite.
    """

    def __init__(self, rng: random.Random, diverge: float = 0.0, hole: float = 0.0):
        self.rng = rng
        self.diverge = diverge
        self.hole_p = hole
        self.hole = None  # (ctx, type) once placed
        self.features: Counter = Counter()
        self._names = itertools.count()
        self._locs = itertools.count(1)
        self._layers: list = []
        self._dup_depth = 0

    # -- names and store layers ------------------------------------------

    def name(self, base: str) -> str:
        return f"{base}{next(self._names)}"

    def push(self) -> None:
        # code under a U lambda may run many times, so its stores must start empty
        self._layers.append([{}, self._dup_depth == 0])

    def pop(self) -> Store:
        cells, _ = self._layers.pop()
        return Store(cells)

    def can_alloc(self) -> bool:
        return bool(self._layers) and self._layers[-1][1]

    @contextmanager
    def no_alloc(self):
        if not self._layers:
            yield
            return
        top = self._layers[-1]
        saved, top[1] = top[1], False
        try:
            yield
        finally:
            top[1] = saved

    @contextmanager
    def duplicated(self):
        self._dup_depth += 1
        try:
            yield
        finally:
            self._dup_depth -= 1

    def cell(self, slot) -> LLoc:
        loc = next(self._locs)
        self._layers[-1][0][loc] = slot
        self.features["location-full" if isinstance(slot, Full) else "location-empty"] += 1
        return LLoc(loc)

    def _pick(self, productions: list):
        """Try weighted productions in random order until one applies."""
        pool = [(w, f) for w, f in productions if w > 0]
        while pool:
            total = sum(w for w, _ in pool)
            r = self.rng.random() * total
            for i, (w, f) in enumerate(pool):
                r -= w
                if r <= 0:
                    break
            _, f = pool.pop(i)
            out = f()
            if out is not None:
                return out
        return None

    # -- U terms ----------------------------------------------------------

    def _uvars(self, ctx: MixedContext, ty) -> list:
        return [e.name for e in ctx.entries if isinstance(e, UVarEntry) and utype_eq(e.ty, ty)]

    def u(self, ctx: MixedContext, ty, size: int):
        """A U term of type ``ty`` under ``ctx``."""
        rng = self.rng
        if self.hole_p and self.hole is None and rng.random() < self.hole_p:
            self.hole = (ctx, ty)
            return UHole(ty)
        if size <= 0:
            return self.u_leaf(ctx, ty)
        c = type(ty)
        prods = [
            (2, lambda: self._u_var(ctx, ty)),
            (4, lambda: self._u_intro(ctx, ty, size)),
            (1.5, lambda: self._u_app(ctx, ty, size)),
            (0.7, lambda: self._u_proj(ctx, ty, size)),
            (1, lambda: self._u_case(ctx, ty, size)),
            (0.5, lambda: self._u_letunit(ctx, ty, size)),
            (0.5, lambda: self._u_unfold(ctx, ty, size)),
            (0.4, lambda: self._u_tapp(ctx, ty, size)),
            (2.5, lambda: self._u_boundary(ctx, ty, size)),
            (self.diverge * 100, lambda: self._u_diverge(ty)),
        ]
        if c is UTVar:
            prods = prods[:1] + prods[2:]
        out = self._pick(prods)
        return out if out is not None else self.u_leaf(ctx, ty)

    def _u_var(self, ctx, ty):
        names = self._uvars(ctx, ty)
        return UVar(self.rng.choice(names)) if names else None

    def _u_intro(self, ctx, ty, size):
        c, rng = type(ty), self.rng
        if c is UUnitT:
            return U_UNITV
        if c is UProd:
            a, b = _split(rng, size, 2)
            return UPair(self.u(ctx, ty.left, a), self.u(ctx, ty.right, b))
        if c is USum:
            i = rng.randrange(2)
            return UInj(i, ty, self.u(ctx, ty.left if i == 0 else ty.right, size - 1))
        if c is UFun:
            x = self.name("x")
            with self.duplicated():
                return ULam(x, ty.arg, self.u(ctx.add_u(x, ty.arg), ty.res, size - 1))
        if c is UMu:
            return UFold(ty, self.u(ctx, unfold_umu(ty), size - 1))
        if c is UForall:
            if not isinstance(ty.body, UFun):
                return None
            a = self.name("a")
            body = _subst_utvar(ty.body, ty.var, UTVar(a))
            x = self.name("x")
            with self.duplicated():
                inner = self.u(ctx.add_utyvar(a).add_u(x, body.arg), body.res, size - 1)
            self.features["u-type-abstraction"] += 1
            return UTLam(a, ULam(x, body.arg, inner))
        return None

    def _u_app(self, ctx, ty, size):
        arg = self.rng.choice(_U_ARGS)
        a, b = _split(self.rng, size, 2)
        return UApp(self.u(ctx, UFun(arg, ty), a), self.u(ctx, arg, b))

    def _u_proj(self, ctx, ty, size):
        other = self.rng.choice(_U_ARGS)
        if self.rng.random() < 0.5:
            return UFst(self.u(ctx, UProd(ty, other), size - 1))
        return USnd(self.u(ctx, UProd(other, ty), size - 1))

    def _u_case(self, ctx, ty, size):
        left, right = self.rng.choice(((U_UNIT, U_UNIT), (U_UNIT, NAT), (BOOL, U_UNIT)))
        a, b, c = _split(self.rng, size, 3)
        x, y = self.name("x"), self.name("y")
        return UCase(self.u(ctx, USum(left, right), a), x, self.u(ctx.add_u(x, left), ty, b),
                     y, self.u(ctx.add_u(y, right), ty, c))

    def _u_letunit(self, ctx, ty, size):
        a, b = _split(self.rng, size, 2)
        return ULetUnit(self.u(ctx, U_UNIT, a), self.u(ctx, ty, b))

    def _u_unfold(self, ctx, ty, size):
        r = self.name("r")
        return UUnfold(UFold(UMu(r, ty), self.u(ctx, ty, size - 1)))

    def _u_tapp(self, ctx, ty, size):
        a, x = self.name("a"), self.name("x")
        ident = UTLam(a, ULam(x, UTVar(a), UVar(x)))
        self.features["u-type-application"] += 1
        return UApp(UTApp(ident, ty), self.u(ctx, ty, size - 1))

    def _u_boundary(self, ctx, ty, size):
        self.push()
        try:
            body = self.l(ctx, frozenset(), LBang(LLumpT(ty)), size - 1)
        finally:
            store = self.pop()
        self.features["ul-boundary"] += 1
        return UL(store, body)

    def _u_diverge(self, ty):
        w, x = self.name("w"), self.name("x")
        rec = UMu(w, UFun(UTVar(w), ty))
        selfapp = ULam(x, rec, UApp(UUnfold(UVar(x)), UVar(x)))
        self.features["divergent"] += 1
        return UApp(selfapp, UFold(rec, selfapp))

    def u_leaf(self, ctx: MixedContext, ty, depth: int = 0):
        """A small U value of type ``ty``; raises Uninhabited when there is none."""
        rng = self.rng
        names = self._uvars(ctx, ty)
        if names and (rng.random() < 0.5 or isinstance(ty, UTVar)):
            return UVar(rng.choice(names))
        if depth > 40:
            raise Uninhabited(f"no small inhabitant found for {_show(ty)}")
        c = type(ty)
        if c is UUnitT:
            return U_UNITV
        if c is UProd:
            return UPair(self.u_leaf(ctx, ty.left, depth + 1), self.u_leaf(ctx, ty.right, depth + 1))
        if c is USum:
            order = [0, 1] if depth > 3 or rng.random() < 0.6 else [1, 0]
            for i in order:
                try:
                    side = ty.left if i == 0 else ty.right
                    return UInj(i, ty, self.u_leaf(ctx, side, depth + 1))
                except Uninhabited:
                    continue
            raise Uninhabited(f"no small inhabitant found for {_show(ty)}")
        if c is UFun:
            x = self.name("x")
            return ULam(x, ty.arg, self.u_leaf(ctx.add_u(x, ty.arg), ty.res, depth + 1))
        if c is UMu:
            return UFold(ty, self.u_leaf(ctx, unfold_umu(ty), depth + 1))
        if c is UForall:
            a = self.name("a")
            body = self.u_leaf(ctx.add_utyvar(a), _subst_utvar(ty.body, ty.var, UTVar(a)),
                               depth + 1)
            return UTLam(a, body)
        raise Uninhabited(f"no value of type {_show(ty)} in scope")

    # -- L terms ----------------------------------------------------------

    def _lvars(self, ctx: MixedContext, pred) -> list:
        return [e for e in ctx.entries if isinstance(e, LVarEntry) and pred(e.ty)]

    def l(self, ctx: MixedContext, must: frozenset, ty, size: int):
        """An L term of type ``ty`` consuming exactly the linear variables ``must``."""
        rng = self.rng
        if must and (size <= 0 or rng.random() < 0.3):
            x = rng.choice(sorted(must))
            return self._discharge(ctx, must, x, ty, size)
        if size <= 0:
            return self.leaf(ctx, ty)
        prods = [
            (1.5, lambda: self._l_var(ctx, must, ty)),
            (5, lambda: self._l_intro(ctx, must, ty, size)),
            (1.2, lambda: self._l_copy(ctx, must, ty, size)),
            (1.5, lambda: self._l_app_lam(ctx, must, ty, size)),
            (0.6, lambda: self._l_app(ctx, must, ty, size)),
            (1, lambda: self._l_letpair(ctx, must, ty, size)),
            (0.6, lambda: self._l_letunit(ctx, must, ty, size)),
            (0.8, lambda: self._l_case(ctx, must, ty, size)),
            (0.6, lambda: self._l_unfold(ctx, must, ty, size)),
            (0.8, lambda: self._l_unbox(ctx, must, ty, size)),
            (0.3, lambda: self._l_phase(ctx, must, ty, size)),
            (2, lambda: self._l_bangvar(ctx, must, ty, size)),
            (1, lambda: self._l_twice(ctx, must, ty, size)),
            (0.7, lambda: self._l_dup_closure(ctx, must, ty, size)),
        ]
        out = self._pick(prods)
        if out is not None:
            return out
        if must:
            return self._discharge(ctx, must, rng.choice(sorted(must)), ty, size)
        return self.leaf(ctx, ty)

    def _l_var(self, ctx, must, ty):
        if len(must) == 1:
            (x,) = must
            if ltype_eq(ctx.lookup(x).ty, ty):
                return LVar(x)
            return None
        if must:
            return None
        ents = self._lvars(ctx, lambda t: duplicable(t) and ltype_eq(t, ty))
        return LVar(self.rng.choice(ents).name) if ents else None

    def _l_intro(self, ctx, must, ty, size):
        c, rng = type(ty), self.rng
        if c is LOne:
            if must:
                return None
            return L_UNITV if rng.random() < 0.6 else LFree(self.l(ctx, must, L_BOX0, size - 1))
        if c is LTensor:
            m1, m2 = _partition(rng, must, 2)
            a, b = _split(rng, size, 2)
            return LPair(self.l(ctx, m1, ty.left, a), self.l(ctx, m2, ty.right, b))
        if c is LPlus:
            i = rng.randrange(2)
            return LInj(i, ty, self.l(ctx, must, ty.left if i == 0 else ty.right, size - 1))
        if c is LLolli:
            if not dischargeable(ty.arg):
                return None
            y = self.name("y")
            inner = must | ({y} if not duplicable(ty.arg) else set())
            return LLam(y, ty.arg, self.l(ctx.add_l(y, ty.arg), frozenset(inner), ty.res, size - 1))
        if c is LMu:
            return LFold(ty, self.l(ctx, must, unfold_lmu(ty), size - 1))
        if c is LBox0:
            if not must and self.can_alloc() and rng.random() < 0.4:
                return self.cell(EMPTY)
            return LNew(self.l(ctx, must, L_ONE, size - 1))
        if c is LBox:
            if not must and self.can_alloc() and rng.random() < 0.4:
                return self._full_cell(ty.body, size)
            m1, m2 = _partition(rng, must, 2)
            a, b = _split(rng, size, 2)
            return LBoxE(LPair(self.l(ctx, m1, L_BOX0, a), self.l(ctx, m2, ty.body, b)))
        if c is LBang:
            return self._l_bang(ctx, must, ty, size)
        if c is LLumpT:
            return LCopy(self.l(ctx, must, LBang(ty), size - 1))
        return None

    def _l_bang(self, ctx, must, ty, size):
        s = ty.body
        prods = []
        if not must:
            prods.append((2, lambda: self._share(ctx, s, size)))
            prods.append((1, lambda: self._share_value(s, size)))
            if isinstance(s, LLumpT):
                prods.append((3, lambda: LU(self.u(ctx, s.utype, size - 1))))
        if isinstance(s, LLumpT):
            prods.append((2, lambda: self._l_lump(ctx, must, s.utype, size)))
        tau = _recover_or_none(ty)
        if tau is not None:
            def unlump():
                self.features["unlump"] += 1
                return LUnlumpOp(ty, self.l(ctx, must, LBang(LLumpT(tau)), size - 1))
            prods.append((2, unlump))
        return self._pick(prods)

    def _share(self, ctx, s, size):
        self.push()
        try:
            body = self.l(ctx, frozenset(), s, size - 1)
        finally:
            store = self.pop()
        self.features["share"] += 1
        return LShare(store, body)

    def _share_value(self, s, size):
        self.push()
        try:
            w = self.value(s, min(size, 4))
        except Uninhabited:
            # cells made before the failure belong to the discarded layer
            return None
        finally:
            store = self.pop()
        self.features["share-value"] += 1
        return LShare(store, w)

    def _full_cell(self, s, size):
        self.push()
        try:
            w = self.value(s, min(size, 3))
        finally:
            local = self.pop()
        return self.cell(Full(w, local))

    def _l_lump(self, ctx, must, tau, size):
        s = random_compat(self.rng, tau)
        self.features["lump"] += 1
        return LLumpOp(LBang(s), self.l(ctx, must, LBang(s), size - 1))

    def _l_copy(self, ctx, must, ty, size):
        return LCopy(self.l(ctx, must, LBang(ty), size - 1))

    def _binder(self) -> object:
        if self.rng.random() < 0.3:
            t = random_ltype(self.rng, 2)
            if dischargeable(t):
                return t
        return self.rng.choice(BINDER_TYPES)

    def _bind(self, ctx, must, names_types):
        for n, t in names_types:
            ctx = ctx.add_l(n, t)
            if not duplicable(t):
                must = must | {n}
        return ctx, frozenset(must)

    def _l_app_lam(self, ctx, must, ty, size):
        s = self._binder()
        y = self.name("y")
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        ctx2, inner = self._bind(ctx, m1, [(y, s)])
        return LApp(LLam(y, s, self.l(ctx2, inner, ty, a)), self.l(ctx, m2, s, b))

    def _l_app(self, ctx, must, ty, size):
        s = self._binder()
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        return LApp(self.l(ctx, m1, LLolli(s, ty), a), self.l(ctx, m2, s, b))

    def _l_letpair(self, ctx, must, ty, size):
        s1, s2 = self._binder(), self._binder()
        p, q = self.name("p"), self.name("q")
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        ctx2, inner = self._bind(ctx, m2, [(p, s1), (q, s2)])
        return LLetPair(p, q, self.l(ctx, m1, LTensor(s1, s2), a), self.l(ctx2, inner, ty, b))

    def _l_letunit(self, ctx, must, ty, size):
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        return LLetUnit(self.l(ctx, m1, L_ONE, a), self.l(ctx, m2, ty, b))

    def _l_case(self, ctx, must, ty, size):
        s1, s2 = self._binder(), self._binder()
        p, q = self.name("p"), self.name("q")
        m1, m2 = _partition(self.rng, must, 2)
        a, b, c = _split(self.rng, size, 3)
        scrut = self.l(ctx, m1, LPlus(s1, s2), a)
        ctx_l, must_l = self._bind(ctx, m2, [(p, s1)])
        ctx_r, must_r = self._bind(ctx, m2, [(q, s2)])
        # both branches consume the same locations, so neither may create new ones
        with self.no_alloc():
            lb = self.l(ctx_l, must_l, ty, b)
            rb = self.l(ctx_r, must_r, ty, c)
        return LCase(scrut, p, lb, q, rb)

    def _l_unfold(self, ctx, must, ty, size):
        r = self.name("r")
        if r in ltype_ftv(ty):
            return None
        return LUnfold(self.l(ctx, must, LMu(r, ty), size - 1))

    def _l_unbox(self, ctx, must, ty, size):
        s = self._binder()
        lv, v = self.name("l"), self.name("v")
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        ctx2, inner = self._bind(ctx, m2, [(lv, L_BOX0), (v, s)])
        return LLetPair(lv, v, LUnboxE(self.l(ctx, m1, LBox(s), a)), self.l(ctx2, inner, ty, b))

    def _l_phase(self, ctx, must, ty, size):
        return LPhase(self.rng.choice(("p", "q")), self.l(ctx, must, ty, size - 1))

    def _l_bangvar(self, ctx, must, ty, size):
        """Use a duplicable variable: ``copy f`` or ``copy f arg``."""
        rng = self.rng
        direct = self._lvars(ctx, lambda t: duplicable(t) and ltype_eq(t.body, ty))
        funcs = self._lvars(ctx, lambda t: duplicable(t) and isinstance(t.body, LLolli)
                            and ltype_eq(t.body.res, ty))
        options = []
        if direct and not must:
            options.append(lambda: LCopy(LVar(rng.choice(direct).name)))
        if funcs:
            def call():
                f = rng.choice(funcs)
                return LApp(LCopy(LVar(f.name)), self.l(ctx, must, f.ty.body.arg, size - 1))
            options.append(call)
        return rng.choice(options)() if options else None

    def _l_twice(self, ctx, must, ty, size):
        """``let () = copy f a in e`` where ``e`` may call ``f`` again."""
        funcs = self._lvars(ctx, lambda t: duplicable(t) and isinstance(t.body, LLolli)
                            and isinstance(t.body.res, LOne))
        if not funcs:
            return None
        f = self.rng.choice(funcs)
        m1, m2 = _partition(self.rng, must, 2)
        a, b = _split(self.rng, size, 2)
        self.features["shared-call"] += 1
        first = LApp(LCopy(LVar(f.name)), self.l(ctx, m1, f.ty.body.arg, a))
        return LLetUnit(first, self.l(ctx, m2, ty, b))

    def _l_dup_closure(self, ctx, must, ty, size):
        """Bind a closure that owns a cell and call it twice, so each copy needs fresh cells."""
        if size < 2:
            return None
        arg = self.rng.choice((L_ONE, L_BOX0, LBang(LLumpT(U_UNIT))))
        inner = self.rng.choice((L_ONE, LBang(L_ONE), L_BOX0))
        y, f, lv, v = self.name("y"), self.name("f"), self.name("l"), self.name("v")
        self.push()
        try:
            if not self.can_alloc():
                return None
            cell = self._full_cell(inner, 1)
        finally:
            store = self.pop()
        use = LLetPair(lv, v, LUnboxE(cell), LLetUnit(LFree(LVar(lv)), self.consume(v, inner)))
        if not duplicable(arg):
            use = LLetUnit(self.consume(y, arg), use)
        closure = LShare(store, LLam(y, arg, use))
        fty = LBang(LLolli(arg, L_ONE))
        with self.no_alloc():
            a1, a2 = self.leaf(ctx, arg), self.leaf(ctx, arg)
        rest = self.l(ctx.add_l(f, fty), must, ty, size - 2)
        body = LLetUnit(LApp(LCopy(LVar(f)), a1), LLetUnit(LApp(LCopy(LVar(f)), a2), rest))
        self.features["duplicated-closure"] += 1
        return LApp(LLam(f, fty, body), closure)

    def _discharge(self, ctx, must, x, ty, size):
        """Consume ``x`` first, then build the rest of the term."""
        s = ctx.lookup(x).ty
        rest = must - {x}
        rng = self.rng
        c = type(s)
        if size > 0 and c is LTensor:
            p, q = self.name("p"), self.name("q")
            ctx2, inner = self._bind(ctx, rest, [(p, s.left), (q, s.right)])
            return LLetPair(p, q, LVar(x), self.l(ctx2, inner, ty, size - 1))
        if size > 0 and c is LPlus:
            p, q = self.name("p"), self.name("q")
            ctx_l, must_l = self._bind(ctx, rest, [(p, s.left)])
            ctx_r, must_r = self._bind(ctx, rest, [(q, s.right)])
            with self.no_alloc():
                lb = self.l(ctx_l, must_l, ty, size - 1)
                rb = self.l(ctx_r, must_r, ty, size - 1)
            return LCase(LVar(x), p, lb, q, rb)
        if size > 0 and c is LBox:
            lv, v = self.name("l"), self.name("v")
            ctx2, inner = self._bind(ctx, rest, [(lv, L_BOX0), (v, s.body)])
            return LLetPair(lv, v, LUnboxE(LVar(x)), self.l(ctx2, inner, ty, size - 1))
        if size > 0 and c is LMu and rng.random() < 0.5:
            y = self.name("y")
            body = unfold_lmu(s)
            ctx2, inner = self._bind(ctx, rest, [(y, body)])
            return LApp(LLam(y, body, self.l(ctx2, inner, ty, size - 1)), LUnfold(LVar(x)))
        return LLetUnit(self.consume(x, s), self.l(ctx, rest, ty, size - 1))

    def consume(self, x: str, s, env: tuple = ()):
        """A closed term of type ``1`` that consumes exactly the variable ``x : s``."""
        for mu, f in env:
            if ltype_eq(s, mu):
                return LApp(LCopy(LVar(f)), LVar(x))
        c = type(s)
        if c is LOne:
            return LVar(x)
        if c is LBox0:
            return LFree(LVar(x))
        if c is LBang:
            return L_UNITV
        if c is LTensor:
            p, q = self.name("p"), self.name("q")
            return LLetPair(p, q, LVar(x), LLetUnit(self.consume(p, s.left, env),
                                                    self.consume(q, s.right, env)))
        if c is LPlus:
            p, q = self.name("p"), self.name("q")
            return LCase(LVar(x), p, self.consume(p, s.left, env), q,
                         self.consume(q, s.right, env))
        if c is LBox:
            lv, v = self.name("l"), self.name("v")
            return LLetPair(lv, v, LUnboxE(LVar(x)),
                            LLetUnit(LFree(LVar(lv)), self.consume(v, s.body, env)))
        if c is LMu:
            f, y, z = self.name("f"), self.name("y"), self.name("z")
            body = unfold_lmu(s)
            inner = LApp(LLam(z, body, self.consume(z, body, env + ((s, f),))), LUnfold(LVar(y)))
            self.features["recursive-consumer"] += 1
            return LApp(fix_l(f, LBang(LLolli(s, L_ONE)), LLam(y, s, inner)), LVar(x))
        if c is LLolli:
            r = self.name("r")
            with self.no_alloc():
                arg = self.leaf(EMPTY_CTX, s.arg)
            return LApp(LLam(r, s.res, self.consume(r, s.res, env)), LApp(LVar(x), arg))
        raise Uninhabited(f"cannot consume a variable of type {_show(s)}")

    def leaf(self, ctx: MixedContext, ty, depth: int = 0):
        """A small closed-over-linear term of type ``ty`` consuming no linear variable."""
        rng = self.rng
        if depth > 40:
            raise Uninhabited(f"no small inhabitant found for {_show(ty)}")
        c = type(ty)
        if c is LBang:
            ents = self._lvars(ctx, lambda t: duplicable(t) and ltype_eq(t, ty))
            if ents and rng.random() < 0.5:
                return LVar(rng.choice(ents).name)
            if isinstance(ty.body, LLumpT) and rng.random() < 0.5:
                return LU(self.u_leaf(ctx, ty.body.utype))
            self.push()
            try:
                body = self.leaf(ctx, ty.body, depth + 1)
            finally:
                store = self.pop()
            return LShare(store, body)
        if c is LOne:
            return L_UNITV
        if c is LTensor:
            return LPair(self.leaf(ctx, ty.left, depth + 1), self.leaf(ctx, ty.right, depth + 1))
        if c is LPlus:
            order = [0, 1] if depth > 3 or rng.random() < 0.6 else [1, 0]
            for i in order:
                try:
                    return LInj(i, ty, self.leaf(ctx, ty.left if i == 0 else ty.right, depth + 1))
                except Uninhabited:
                    continue
            raise Uninhabited(f"no small inhabitant found for {_show(ty)}")
        if c is LLolli:
            if not dischargeable(ty.arg):
                raise Uninhabited(f"cannot build a function consuming {_show(ty.arg)}")
            y = self.name("y")
            res = self.leaf(ctx, ty.res, depth + 1)
            if not duplicable(ty.arg):
                res = LLetUnit(self.consume(y, ty.arg), res)
            return LLam(y, ty.arg, res)
        if c is LMu:
            return LFold(ty, self.leaf(ctx, unfold_lmu(ty), depth + 1))
        if c is LBox0:
            if self.can_alloc() and rng.random() < 0.5:
                return self.cell(EMPTY)
            return LNew(L_UNITV)
        if c is LBox:
            if self.can_alloc() and rng.random() < 0.5:
                return self._full_cell(ty.body, 1)
            return LBoxE(LPair(LNew(L_UNITV), self.leaf(ctx, ty.body, depth + 1)))
        if c is LLumpT:
            return LCopy(LU(self.u_leaf(ctx, ty.utype)))
        raise Uninhabited(f"no value of type {_show(ty)} in scope")

    def value(self, ty, size: int, depth: int = 0):
        """A closed L value of type ``ty``; locations go into the current store layer."""
        rng = self.rng
        if depth > 40:
            raise Uninhabited(f"no small value found for {_show(ty)}")
        c = type(ty)
        if c is LOne:
            return L_UNITV
        if c is LTensor:
            return LPair(self.value(ty.left, size - 1, depth + 1),
                         self.value(ty.right, size - 1, depth + 1))
        if c is LPlus:
            order = [0, 1] if (size <= 0 and rng.random() < 0.8) else rng.sample([0, 1], 2)
            for i in order:
                try:
                    side = ty.left if i == 0 else ty.right
                    return LInj(i, ty, self.value(side, size - 1, depth + 1))
                except Uninhabited:
                    continue
            raise Uninhabited(f"no small value found for {_show(ty)}")
        if c is LMu:
            return LFold(ty, self.value(unfold_lmu(ty), size - 1, depth + 1))
        if c is LBang:
            self.push()
            try:
                w = self.value(ty.body, size - 1, depth + 1)
            finally:
                store = self.pop()
            return LShare(store, w)
        if c is LBox0:
            return self.cell(EMPTY) if self.can_alloc() else None or self._no_cell(ty)
        if c is LBox:
            if not self.can_alloc():
                self._no_cell(ty)
            self.push()
            try:
                w = self.value(ty.body, size - 1, depth + 1)
            finally:
                local = self.pop()
            return self.cell(Full(w, local))
        if c is LLumpT:
            return LLumpVal(self.u_leaf(EMPTY_CTX, ty.utype))
        if c is LLolli:
            if not dischargeable(ty.arg):
                raise Uninhabited(f"cannot build a function consuming {_show(ty.arg)}")
            y = self.name("y")
            ctx = EMPTY_CTX.add_l(y, ty.arg)
            must = frozenset() if duplicable(ty.arg) else frozenset({y})
            return LLam(y, ty.arg, self.l(ctx, must, ty.res, max(size, 0)))
        raise Uninhabited(f"no closed value of type {_show(ty)}")

    @staticmethod
    def _no_cell(ty):
        raise Uninhabited(f"a value of type {_show(ty)} needs a store cell here")

    # -- whole programs ---------------------------------------------------

    def fill_hole(self, size: int):
        """A filler for the hole planted by the last program, typed in the hole's context."""
        if self.hole is None:
            raise ValueError("no hole was planted")
        hole_ctx, hole_ty = self.hole
        self.hole_p = 0.0
        # the filler may land under a U lambda, so it must not pre-allocate cells
        with self.duplicated():
            return self.u(hole_ctx, hole_ty, size)

    def program(self, ty, size: int):
        """A closed U program of type ``ty`` that usually crosses into L."""
        rng = self.rng
        if rng.random() < 0.55:
            s = random_compat(rng, ty)
            self.push()
            try:
                self.push()
                try:
                    body = self.l(EMPTY_CTX, frozenset(), s, size)
                finally:
                    local = self.pop()
                term = LLumpOp(LBang(s), LShare(local, body))
            finally:
                store = self.pop()
            self.features["lumped-program"] += 1
            return UL(store, term)
        return self.u(EMPTY_CTX, ty, size)


def _subst_utvar(t, var, repl):
    from .ast import subst_utype

    return subst_utype(t, var, repl)


def _recover_or_none(t):
    from .interop import recover_u

    try:
        return recover_u(t)
    except NotInImage:
        return None


def _show(x) -> str:
    from .pretty import pretty

    return pretty(x)


# ---------------------------------------------------------------------------
# Public generator entry points
# ---------------------------------------------------------------------------


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def gen_u_term(ctx: MixedContext, ty, size_budget: int, seed):
    """A well-typed U term of type ``ty`` (checked before it is returned)."""
    from .typecheck_u import typecheck_u

    e = Gen(_rng(seed)).u(ctx, ty, size_budget)
    got = typecheck_u(ctx, e)
    assert utype_eq(got, ty), f"generator produced {_show(got)} for {_show(ty)}"
    return e


def gen_l_config(ctx: MixedContext, ty, size_budget: int, seed, gen: Optional[Gen] = None):
    """A well-typed configuration ``<σ, e>`` of type ``ty`` consuming the linear part of ``ctx``."""
    from .typecheck_l import check_configuration

    g = gen or Gen(_rng(seed))
    g.push()
    try:
        e = g.l(ctx, ctx.linear_vars(), ty, size_budget)
    finally:
        store = g.pop()
    got, usage = check_configuration(ctx, store, e)
    assert ltype_eq(got, ty), f"generator produced {_show(got)} for {_show(ty)}"
    assert usage.consumed_vars == ctx.linear_vars(), "generator left a linear variable unused"
    return Configuration(store, e)


def gen_program(ty, size_budget: int, seed, diverge: float = 0.0):
    """A closed, well-typed UL program of type ``ty``."""
    from .typecheck_u import typecheck_u

    g = Gen(_rng(seed), diverge=diverge)
    e = g.program(ty, size_budget)
    got = typecheck_u(EMPTY_CTX, e)
    assert utype_eq(got, ty), f"generator produced {_show(got)} for {_show(ty)}"
    return e


# ---------------------------------------------------------------------------
# Independent checks on machine states
# ---------------------------------------------------------------------------


def store_layers(state) -> list:
    """Every (store, expression) layer of a state, outermost first."""
    out = []
    if isinstance(state, Configuration):
        out.append((state.store, state.expr))
        _collect_layers(state.store, out)
        _collect_layers_expr(state.expr, out)
    else:
        _collect_layers_expr(state, out)
    return out


def _collect_layers(store: Store, out: list) -> None:
    for _, slot in store.items():
        if isinstance(slot, Full):
            out.append((slot.local, slot.value))
            _collect_layers(slot.local, out)
            _collect_layers_expr(slot.value, out)


def _collect_layers_expr(e, out: list) -> None:
    if isinstance(e, (UL, LShare)):
        out.append((e.store, e.body))
        _collect_layers(e.store, out)
    for k in children(e):
        _collect_layers_expr(k, out)


def hygiene_problems(state) -> list:
    """Location hygiene of a state.

    Each layer (the top store, every share or UL store, every full cell's
    local store) must own exactly the free locations of its expression, and
    no layer may rebind a location already bound by an enclosing layer.
    Sibling layers may reuse names: substituting a shared value copies its
    store, and those copies are independent binders.
    """
    problems: list = []
    if isinstance(state, Configuration):
        _hygiene_layer(state.store, state.expr, frozenset(), problems)
    else:
        _hygiene_expr(state, frozenset(), problems)
    return problems


def _store_tree_locations(store: Store, out: list) -> list:
    for loc, slot in store.items():
        out.append(loc)
        if isinstance(slot, Full):
            _store_tree_locations(slot.local, out)
    return out


def _hygiene_layer(store: Store, expr, outer: frozenset, problems: list,
                   root: bool = True) -> None:
    dom = store.domain()
    if root:
        locs = _store_tree_locations(store, [])
        if len(locs) != len(set(locs)):
            dup = min(loc for loc in locs if locs.count(loc) > 1)
            problems.append(f"location #{dup} appears twice in one store")
    clash = dom & outer
    if clash:
        problems.append(f"location #{min(clash)} is rebound inside its own scope")
    missing = expr.locs - dom
    if missing:
        problems.append(f"location #{min(missing)} is used outside its store")
    unused = dom - expr.locs
    if unused:
        problems.append(f"location #{min(unused)} is bound but never referenced")
    scope = outer | dom
    for _, slot in store.items():
        if isinstance(slot, Full):
            _hygiene_layer(slot.local, slot.value, scope, problems, root=False)
    _hygiene_expr(expr, scope, problems)


def _hygiene_expr(e, scope: frozenset, problems: list) -> None:
    if isinstance(e, (UL, LShare)):
        _hygiene_layer(e.store, e.body, scope, problems)
        return
    for k in children(e):
        _hygiene_expr(k, scope, problems)


def _l_rule(store: Store, e) -> list:
    """Rules whose left-hand side matches the L node ``e`` (children already values)."""
    t, out = type(e), []
    b = getattr(e, "body", None)
    if t is LApp and type(e.fn) is LLam and e.arg.is_value:
        out.append("l-beta")
    if t is LLetPair and type(e.bound) is LPair and e.bound.is_value:
        out.append("l-let-pair")
    if t is LLetUnit and type(e.bound) is LUnitV:
        out.append("l-let-unit")
    if t is LCase and type(e.scrut) is LInj and e.scrut.is_value:
        out.append("l-case")
    if t is LUnfold and type(b) is LFold and b.is_value:
        out.append("l-unfold-fold")
    if t is LNew and type(b) is LUnitV:
        out.append("l-new")
    if t is LFree and type(b) is LLoc and isinstance(store.get(b.loc), Empty):
        out.append("l-free")
    if (t is LBoxE and type(b) is LPair and type(b.left) is LLoc and b.right.is_value
            and isinstance(store.get(b.left.loc), Empty)):
        out.append("l-box")
    if t is LUnboxE and type(b) is LLoc and isinstance(store.get(b.loc), Full):
        out.append("l-unbox")
    if t is LCopy and type(b) is LShare and b.is_value:
        w = b.body
        kinds = {LUnitV: "copy-unit", LPair: "copy-pair", LInj: "copy-inj", LFold: "copy-fold",
                 LLam: "copy-fun", LShare: "copy-share", LLumpVal: "copy-lump"}
        if type(w) in kinds:
            out.append(kinds[type(w)])
        if type(w) is LLoc:
            slot = b.store.get(w.loc)
            if isinstance(slot, Empty):
                out.append("copy-loc-empty")
            elif isinstance(slot, Full):
                out.append("copy-loc-full")
    if t is LU and b.is_value:
        out.append("lu-enter")
    if (t is LUnlumpOp and type(b) is LShare and not b.store and type(b.body) is LLumpVal):
        out.append("unlump")
    if t is LLumpOp and b.is_value:
        out.append("lump")
    if t is LPhase and b.is_value:
        out.append("phase-exit")
    return out


def _u_rule(e) -> list:
    t, out = type(e), []
    if t is UApp and type(e.fn) is ULam and e.arg.is_value:
        out.append("u-beta")
    if t is UFst and type(e.body) is UPair and e.body.is_value:
        out.append("u-fst")
    if t is USnd and type(e.body) is UPair and e.body.is_value:
        out.append("u-snd")
    if t is ULetUnit and e.bound.is_value:
        out.append("u-let-unit")
    if t is UCase and type(e.scrut) is UInj and e.scrut.is_value:
        out.append("u-case")
    if t is UUnfold and type(e.body) is UFold and e.body.is_value:
        out.append("u-unfold-fold")
    if t is UTApp and type(e.body) is UTLam:
        out.append("u-tbeta")
    if (t is UL and not e.store and type(e.body) is LShare and not e.body.store
            and type(e.body.body) is LLumpVal):
        out.append("ul-exit")
    return out


_U_EVAL = {
    UApp: ("fn", "arg"), UPair: ("left", "right"), UFst: ("body",), USnd: ("body",),
    ULetUnit: ("bound",), UInj: ("body",), UCase: ("scrut",), UFold: ("body",),
    UUnfold: ("body",), UTApp: ("body",),
}
_L_EVAL = {
    LApp: ("fn", "arg"), LPair: ("left", "right"), LLetPair: ("bound",), LLetUnit: ("bound",),
    LInj: ("body",), LCase: ("scrut",), LFold: ("body",), LUnfold: ("body",), LNew: ("body",),
    LFree: ("body",), LBoxE: ("body",), LUnboxE: ("body",), LCopy: ("body",),
    LUnlumpOp: ("body",), LLumpOp: ("body",),
}


def redexes(state) -> list:
    """All ``(position, rule)`` decompositions of a state into evaluation context and redex.

    This follows the evaluation-context grammar directly and is independent
    of the evaluator; a deterministic semantics yields exactly one entry for
    every non-value state.
    """
    out: list = []
    if isinstance(state, Configuration):
        _l_redexes(state.store, state.expr, [], out)
    else:
        _u_redexes(state, [], out)
    return out


def _u_redexes(e, path, out):
    if e.is_value:
        return
    if type(e) is UL:
        if not e.body.is_value:
            _l_redexes(e.store, e.body, path + ["UL"], out)
    else:
        for label in _U_EVAL.get(type(e), ()):
            kid = getattr(e, label)
            if not kid.is_value:
                _u_redexes(kid, path + [label], out)
                break
    for rule in _u_rule(e):
        out.append(("/".join(path) or "top", rule))


def _l_redexes(store, e, path, out):
    if e.is_value:
        return
    t = type(e)
    if t is LShare:
        _l_redexes(e.store, e.body, path + ["share"], out)
        return
    if t is LU:
        if not e.body.is_value:
            _u_redexes(e.body, path + ["LU"], out)
    elif t is LPhase:
        if not e.body.is_value:
            _l_redexes(store, e.body, path + ["phase"], out)
    else:
        for label in _L_EVAL.get(t, ()):
            kid = getattr(e, label)
            if not kid.is_value:
                _l_redexes(store, kid, path + [label], out)
                break
    for rule in _l_rule(store, e):
        out.append(("/".join(path) or "top", rule))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    """Outcome of one property suite."""

    property: str
    seed: object
    samples: int = 0
    failures: int = 0
    runtime_ms: int = 0
    counters: Counter = field(default_factory=Counter)
    rules: Counter = field(default_factory=Counter)
    messages: list = field(default_factory=list)
    counterexample: Optional[str] = None
    first_failure: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def summary(self) -> dict:
        return {"property": self.property, "samples": self.samples, "failures": self.failures,
                "seed": self.seed, "runtime_ms": self.runtime_ms}

    def text(self) -> str:
        head = (f"{self.property}: {self.samples} samples, {self.failures} failures "
                f"(seed {self.seed}, {self.runtime_ms} ms)")
        lines = [head]
        if self.counters:
            lines.append("  " + ", ".join(f"{k}={v}" for k, v in sorted(self.counters.items())))
        lines.extend("  " + m for m in self.messages[:10])
        if self.counterexample:
            lines.append("  counterexample: " + self.counterexample)
        return "\n".join(lines)

    def add_failure(self, index: int, message: str) -> None:
        self.failures += 1
        if self.first_failure is None:
            self.first_failure = index
        if len(self.messages) < 50:
            self.messages.append(f"sample {index}: {message}")


def write_summary(reports, path) -> None:
    """Write the machine-readable summary of some reports as a JSON list."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.summary() for r in reports], fh, indent=2)
        fh.write("\n")


def _sample_rng(seed, index: int) -> random.Random:
    return random.Random(f"{seed}:{index}")


def _run_batches(fn: Callable, args: list, workers: int) -> list:
    if workers <= 1 or len(args) < 2:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args), chunksize=max(1, len(args) // (workers * 8))))


# ---------------------------------------------------------------------------
# Subject reduction and progress
# ---------------------------------------------------------------------------


@dataclass
class _SROutcome:
    problems: list
    rules: Counter
    steps: int
    features: Counter
    config: Optional[Configuration] = None
    ty: object = None


def _sr_trace(config: Configuration, ty, max_steps: int, mutants=()) -> tuple:
    """Step ``config`` and check every successor; returns (problems, rules fired, steps)."""
    from .typecheck_l import infer_store_typing

    trace: list = []
    m = Machine(mutants=mutants, trace=trace)
    m.reserve_locations(config)
    state = config
    steps = 0
    for _ in range(max_steps):
        if state.expr.is_value:
            break
        predicted = redexes(state)
        if len(predicted) != 1:
            return [f"determinism: {len(predicted)} redexes {predicted}"], m.stats.rules, steps
        before = len(trace)
        res = m.step(state)
        if isinstance(res, Stuck):
            return [f"progress: stuck ({res.diagnostic})"], m.stats.rules, steps
        if not isinstance(res, Stepped):
            break
        steps += 1
        fired = [(r["position"], r["rule"]) for r in trace[before:]]
        if fired != predicted:
            return [f"determinism: machine fired {fired}, grammar predicts {predicted}"], \
                m.stats.rules, steps
        state = res.state
        bad = hygiene_problems(state)
        if bad:
            return [f"hygiene after step {steps}: {bad[0]}"], m.stats.rules, steps
        try:
            infer_store_typing(state.store, state.expr, ty)
        except ULError as err:
            return [f"preservation after step {steps} ({fired[0][1]}): {err.message}"], \
                m.stats.rules, steps
    return [], m.stats.rules, steps


def _sr_sample(seed, index: int, max_steps: int, size: int, mutants: tuple) -> _SROutcome:
    rng = _sample_rng(seed, index)
    g = Gen(rng)
    ty = rng.choice(L_TARGETS) if rng.random() < 0.7 else random_ltype(rng, 3)
    if not dischargeable(ty) and not isinstance(ty, LLumpT):
        ty = rng.choice(L_TARGETS)
    config = gen_l_config(EMPTY_CTX, ty, size, rng, gen=g)
    problems, rules, steps = _sr_trace(config, ty, max_steps, mutants)
    return _SROutcome(problems, Counter(rules), steps, g.features,
                      config if problems else None, ty if problems else None)


def check_subject_reduction(n_samples: int = 10_000, max_steps: int = 50, seed=0, size: int = 7,
                            mutants=(), workers: int = 1, stop_on_failure: bool = False,
                            shrink: bool = True) -> Report:
    """Generate configurations, step them, and re-type every successor at the same type.

    Also checks progress (no stuck state), location hygiene and that the
    machine fires exactly the redex the evaluation-context grammar predicts.
    """
    rep = Report("subject_reduction", seed)
    start = time.perf_counter()
    mutants = tuple(mutants)
    batch = 1 if stop_on_failure else max(1, n_samples)
    i = 0
    while i < n_samples:
        idx = list(range(i, min(n_samples, i + batch)))
        outs = _run_batches(_sr_sample, [(seed, j, max_steps, size, mutants) for j in idx], workers)
        for j, out in zip(idx, outs):
            rep.samples += 1
            rep.rules.update(out.rules)
            rep.counters["steps"] += out.steps
            for k, v in out.features.items():
                rep.counters[k] += v
            if out.problems:
                rep.add_failure(j, out.problems[0])
                if rep.counterexample is None:
                    cfg = out.config
                    if shrink:
                        cfg = shrink_config(cfg, out.ty, lambda c: bool(
                            _sr_trace(c, out.ty, max_steps, mutants)[0]))
                    rep.counterexample = _show(cfg)
        i += batch
        if stop_on_failure and rep.failures:
            break
    rep.runtime_ms = int((time.perf_counter() - start) * 1000)
    return rep


def shrink_config(config: Configuration, ty, fails: Callable, budget: int = 300) -> Configuration:
    """Greedy shrinking: replace subterms by their own subterms while typing and failure persist."""
    from .typecheck_l import infer_store_typing

    def well_typed(c):
        try:
            infer_store_typing(c.store, c.expr, ty)
            return True
        except ULError:
            return False

    current = config
    tries = 0
    improved = True
    while improved and tries < budget:
        improved = False
        for cand in _shrink_candidates(current):
            tries += 1
            if tries > budget:
                break
            if well_typed(cand) and fails(cand):
                current = cand
                improved = True
                break
    return current


def _shrink_candidates(config: Configuration):
    for new in _replacements(config.expr):
        yield Configuration(config.store.restrict(new.locs), new)


def _replacements(e):
    """Terms obtained by replacing one subterm of ``e`` with one of its own L children."""
    kids = children(e)
    for k in kids:
        if type(k).__name__.startswith("L") and type(e).__name__.startswith("L"):
            yield k
    for i, k in enumerate(kids):
        for sub in _replacements(k):
            new = list(kids)
            new[i] = sub
            try:
                yield rebuild(e, new)
            except (TypeError, ValueError):
                continue


# ---------------------------------------------------------------------------
# Differential testing against the functional translation
# ---------------------------------------------------------------------------


@dataclass
class _DiffOutcome:
    problems: list
    rules: Counter
    features: Counter
    direct: str
    pure_u: bool


def _diff_one(expr, fuel: int, mutants=()) -> tuple:
    from .funtrans import funtrans_expr
    from .typecheck_u import typecheck_u

    problems = []
    ty = typecheck_u(EMPTY_CTX, expr)
    translated = funtrans_expr(expr)
    try:
        tty = typecheck_u(EMPTY_CTX, translated)
        if not utype_eq(tty, ty):
            problems.append(f"translation has type {_show(tty)}, source {_show(ty)}")
    except ULError as err:
        problems.append(f"translation does not typecheck: {err.headline()}")
    pure = not _mentions_l(expr)
    if pure and not alpha_eq(translated, expr):
        problems.append("translation of a pure U program is not the identity")
    direct = run(expr, fuel, mutants=mutants)
    oracle = run(translated, fuel * ORACLE_FUEL_RATIO)
    kinds = (type(direct.outcome).__name__, type(oracle.outcome).__name__)
    if isinstance(direct.outcome, Stuck):
        problems.append(f"direct run stuck: {direct.outcome.diagnostic}")
    elif isinstance(oracle.outcome, Stuck):
        problems.append(f"oracle run stuck: {oracle.outcome.diagnostic}")
    elif direct.terminated != oracle.terminated:
        problems.append(f"termination differs: direct {kinds[0]}, oracle {kinds[1]}")
    elif direct.terminated and not alpha_eq(direct.value, oracle.value):
        problems.append(f"values differ: direct {_show(direct.value)}, oracle {_show(oracle.value)}")
    return problems, direct, pure


def _mentions_l(e) -> bool:
    if isinstance(e, UL):
        return True
    return any(_mentions_l(k) for k in children(e))


def _diff_sample(seed, index: int, fuel: int, size: int, mutants: tuple) -> _DiffOutcome:
    rng = _sample_rng(seed, index)
    g = Gen(rng, diverge=0.002)
    ty = rng.choice(FIRST_ORDER)
    expr = g.program(ty, size)
    problems, direct, pure = _diff_one(expr, fuel, mutants)
    return _DiffOutcome(problems, Counter(direct.stats.rules), g.features,
                        type(direct.outcome).__name__, pure)


def check_differential(n_samples: int = 1000, fuel: int = DEFAULT_FUEL, seed=0, size: int = 8,
                       mutants=(), workers: int = 1, stop_on_failure: bool = False,
                       programs: tuple = ()) -> Report:
    """Run generated programs directly and through the functional translation; they must agree.

    ``programs`` adds extra closed programs (for instance the corpus) to the
    generated ones.
    """
    rep = Report("differential", seed)
    start = time.perf_counter()
    mutants = tuple(mutants)
    batch = 1 if stop_on_failure else max(1, n_samples)
    i = 0
    while i < n_samples:
        idx = list(range(i, min(n_samples, i + batch)))
        outs = _run_batches(_diff_sample, [(seed, j, fuel, size, mutants) for j in idx], workers)
        for j, out in zip(idx, outs):
            rep.samples += 1
            rep.rules.update(out.rules)
            rep.counters[out.direct] += 1
            rep.counters["pure_u"] += out.pure_u
            for k, v in out.features.items():
                rep.counters[k] += v
            if out.problems:
                rep.add_failure(j, out.problems[0])
        i += batch
        if stop_on_failure and rep.failures:
            break
    for k, expr in enumerate(programs):
        problems, direct, _ = _diff_one(expr, fuel, mutants)
        rep.samples += 1
        rep.rules.update(direct.stats.rules)
        if problems:
            rep.add_failure(n_samples + k, problems[0])
    rep.runtime_ms = int((time.perf_counter() - start) * 1000)
    return rep


def check_compositionality_suite(n_samples: int = 100, seed=0, size: int = 6) -> Report:
    """Translate ``C[e]`` whole and in parts on generated context/filler pairs."""
    from .funtrans import check_compositionality, plug
    from .typecheck_u import typecheck_u

    rep = Report("compositionality", seed)
    start = time.perf_counter()
    index = 0
    while rep.samples < n_samples:
        rng = _sample_rng(seed, index)
        index += 1
        g = Gen(rng, hole=0.2)
        ty = rng.choice(FIRST_ORDER)
        context = g.program(ty, size)
        if g.hole is None:
            continue
        filler = g.fill_hole(size)
        rep.samples += 1
        try:
            typecheck_u(EMPTY_CTX, plug(context, filler))
            if not check_compositionality(context, filler):
                rep.add_failure(index - 1, "translation of C[e] differs from [C][[e]]")
        except ULError as err:
            rep.add_failure(index - 1, f"plugged program rejected: {err.headline()}")
    rep.runtime_ms = int((time.perf_counter() - start) * 1000)
    return rep


# ---------------------------------------------------------------------------
# Compatibility and conversions
# ---------------------------------------------------------------------------


def enumerate_ltypes(max_size: int, bound: tuple = ()):
    """Every L type of AST size at most ``max_size`` over the leaves ``1`` and ``Lump(unit)``.

    Constructors: ``*``, ``+``, ``-o``, ``!``, ``Box`` and ``mu`` (whose
    variables become extra leaves).
    """
    for n in range(1, max_size + 1):
        yield from _ltypes_of_size(n, bound)


def _ltypes_of_size(n: int, bound: tuple):
    return _sized(n, bound)


_SIZED_CACHE: dict = {}


def _sized(n: int, bound: tuple) -> list:
    key = (n, bound)
    if key in _SIZED_CACHE:
        return _SIZED_CACHE[key]
    out: list = []
    if n == 1:
        out = [L_ONE, LLumpT(U_UNIT)] + [LTVar(b) for b in bound]
    else:
        for inner in _sized(n - 1, bound):
            out.append(LBang(inner))
            out.append(LBox(inner))
        var = f"m{len(bound)}"
        out.extend(LMu(var, body) for body in _sized(n - 1, bound + (var,)))
        for k in range(1, n - 1):
            lefts, rights = _sized(k, bound), _sized(n - 1 - k, bound)
            for a in lefts:
                for b in rights:
                    out.append(LTensor(a, b))
                    out.append(LPlus(a, b))
                    out.append(LLolli(a, b))
    _SIZED_CACHE[key] = out
    return out


def check_compat_determinism(max_size: int = 8) -> Report:
    """Exhaustively check that each L type is compatible with at most one U type."""
    from .interop import all_compatible, compat, distinct_types, recover_u

    rep = Report("compat_determinism", seed=None)
    start = time.perf_counter()
    for t in enumerate_ltypes(max_size):
        rep.samples += 1
        found = distinct_types(all_compatible(t))
        if len(found) > 1:
            rep.add_failure(rep.samples, f"{_show(t)} is compatible with "
                            + ", ".join(_show(x) for x in found))
            continue
        try:
            tau = recover_u(t)
        except NotInImage:
            tau = None
        if found:
            rep.counters["in_image"] += 1
            if tau is None or not utype_eq(tau, found[0]) or not compat((), found[0], t):
                rep.add_failure(rep.samples, f"recover_u disagrees with the rules on {_show(t)}")
        elif tau is not None:
            rep.add_failure(rep.samples, f"recover_u invents {_show(tau)} for {_show(t)}")
    rep.runtime_ms = int((time.perf_counter() - start) * 1000)
    return rep


def compat_rules_used(t) -> set:
    """Names of the compatibility rules a derivation for ``!t`` goes through."""
    used: set = set()

    def go(s):
        c = type(s)
        name = {LOne: "unit", LTensor: "product", LPlus: "sum", LLolli: "function",
                LLumpT: "lump", LBang: "bang", LBox: "box", LMu: "mu", LTVar: "variable"}.get(c)
        if name:
            used.add(name)
        if c in (LTensor, LPlus):
            go(s.left)
            go(s.right)
        elif c is LLolli:
            go(s.arg.body)
            go(s.res.body)
        elif c in (LBang, LBox, LMu):
            go(s.body)

    if isinstance(t, LBang):
        go(t.body)
    return used


def random_u_value(rng: random.Random, ty, size: int):
    """A random closed U value of a first-order type."""
    c = type(ty)
    if c is UUnitT:
        return U_UNITV
    if c is UProd:
        return UPair(random_u_value(rng, ty.left, size - 1), random_u_value(rng, ty.right, size - 1))
    if c is USum:
        i = rng.randrange(2) if size > 0 else 0
        return UInj(i, ty, random_u_value(rng, ty.left if i == 0 else ty.right, size - 1))
    if c is UMu:
        return UFold(ty, random_u_value(rng, unfold_umu(ty), size - 1))
    raise Uninhabited(f"no first-order value of type {_show(ty)}")


def random_first_order(rng: random.Random, depth: int = 3, bound: tuple = ()):
    """A random first-order U type (products, sums, recursion)."""
    if depth <= 0 or rng.random() < 0.2:
        return rng.choice([U_UNIT] + [UTVar(b) for b in bound]) if bound else U_UNIT
    k = rng.randrange(5)
    if k == 0:
        return UProd(random_first_order(rng, depth - 1, bound),
                     random_first_order(rng, depth - 1, bound))
    if k == 1 or (k == 4 and len(bound) >= 2):
        return USum(random_first_order(rng, depth - 1, bound),
                    random_first_order(rng, depth - 1, bound))
    if k == 2:
        return rng.choice(FIRST_ORDER)
    if k == 3:
        return U_UNIT
    var = f"t{len(bound)}"
    return UMu(var, USum(U_UNIT, random_first_order(rng, depth - 1, bound + (var,))))


def check_conversions(n_first_order: int = 1000, n_functions: int = 100, seed=0,
                      fuel: int = DEFAULT_FUEL) -> Report:
    """Round-trip U values through L and back; probe converted functions on arguments."""
    from .interop import compat, l_to_u, recover_u, u_to_l

    rep = Report("conversion", seed)
    start = time.perf_counter()
    for i in range(n_first_order):
        rng = _sample_rng(seed, i)
        tau = random_first_order(rng)
        t = LBang(random_compat(rng, tau))
        rep.samples += 1
        for rule in compat_rules_used(t):
            rep.counters[f"rule:{rule}"] += 1
        try:
            if not (compat((), tau, t) and utype_eq(recover_u(t), tau)):
                rep.add_failure(i, f"{_show(tau)} and {_show(t)} should be compatible")
                continue
            v = random_u_value(rng, tau, rng.randint(0, 6))
            w = u_to_l(v, t, itertools.count(1).__next__)
            back = l_to_u(w, t)
        except ULError as err:
            rep.add_failure(i, f"conversion of a {_show(tau)} value at {_show(t)} failed: "
                            f"{err.headline()}")
            continue
        if not alpha_eq(back, v):
            rep.add_failure(i, f"round trip changed {_show(v)} into {_show(back)}")
    for i in range(n_functions):
        rng = _sample_rng(seed, n_first_order + i)
        arg, res = rng.choice(FIRST_ORDER), rng.choice(FIRST_ORDER)
        tau = UFun(arg, res)
        t = LBang(random_compat(rng, tau))
        rep.samples += 1
        for rule in compat_rules_used(t):
            rep.counters[f"rule:{rule}"] += 1
        g = Gen(rng)
        fn = g.u(EMPTY_CTX, tau, 5)
        if not fn.is_value:
            fn = ULam("x", arg, UApp(fn, UVar("x")))
        probe = random_u_value(rng, arg, rng.randint(0, 5))
        try:
            back = l_to_u(u_to_l(fn, t, itertools.count(1).__next__), t)
        except ULError as err:
            rep.add_failure(n_first_order + i, f"function conversion failed: {err.headline()}")
            continue
        a = run(UApp(fn, probe), fuel)
        b = run(UApp(back, probe), fuel * ORACLE_FUEL_RATIO)
        if isinstance(b.outcome, Stuck) or a.terminated != b.terminated or (
                a.terminated and not alpha_eq(a.value, b.value)):
            rep.add_failure(n_first_order + i, f"converted function disagrees on {_show(probe)}")
    rep.runtime_ms = int((time.perf_counter() - start) * 1000)
    return rep


# ---------------------------------------------------------------------------
# Mutation testing and coverage
# ---------------------------------------------------------------------------


def catch_mutant(mutant: str, n_samples: int = 1000, seed=0) -> dict:
    """Run the subject-reduction and differential suites against one evaluator mutant."""
    sr = check_subject_reduction(n_samples, 50, seed, mutants=(mutant,), stop_on_failure=True,
                                 shrink=False)
    out = {"mutant": mutant, "subject_reduction": sr.first_failure, "differential": None}
    if sr.failures == 0:
        diff = check_differential(n_samples, DEFAULT_FUEL, seed, mutants=(mutant,),
                                  stop_on_failure=True)
        out["differential"] = diff.first_failure
    out["caught"] = out["subject_reduction"] is not None or out["differential"] is not None
    return out


def missing_rules(*reports: Report) -> list:
    """Reduction rules that never fired across the given reports."""
    fired: Counter = Counter()
    for r in reports:
        fired.update(r.rules)
    return [r for r in ALL_RULES if not fired[r]]


PROPERTIES = ("sr", "compat", "conversion", "differential", "compositionality")


def run_properties(props=PROPERTIES, samples: Optional[int] = None, seed=0,
                   workers: int = 1) -> list:
    """Run the named property suites; ``samples`` overrides each suite's default size."""
    reports = []
    for p in props:
        if p == "sr":
            reports.append(check_subject_reduction(samples or 10_000, 50, seed, workers=workers))
        elif p == "compat":
            reports.append(check_compat_determinism())
        elif p == "conversion":
            n = samples or 1000
            reports.append(check_conversions(n, max(1, n // 10), seed))
        elif p == "differential":
            reports.append(check_differential(samples or 1000, DEFAULT_FUEL, seed,
                                              workers=workers))
        elif p == "compositionality":
            reports.append(check_compositionality_suite(samples or 100, seed))
        else:
            raise ValueError(f"unknown property {p!r}; choose from {', '.join(PROPERTIES)}")
    return reports


__all__ = [
    "FIRST_ORDER", "Gen", "L_TARGETS", "PROPERTIES", "Report", "U_TYPES", "catch_mutant",
    "check_compat_determinism", "check_compositionality_suite", "check_conversions",
    "check_differential", "check_subject_reduction", "compat_rules_used", "dischargeable",
    "enumerate_ltypes", "gen_l_config", "gen_program", "gen_u_term", "hygiene_problems",
    "missing_rules", "random_compat", "random_ltype", "random_u_value", "redexes",
    "run_properties", "shrink_config", "store_layers", "write_summary",
]
