"""Abstract syntax for the U and L languages, stores, contexts and configurations.

Every node is an immutable dataclass.  Expression nodes precompute whether they
are syntactic values and lazily cache their free variables and free locations,
which keeps the small-step evaluator close to linear in the redex depth.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Union

# ---------------------------------------------------------------------------
# Fresh names
# ---------------------------------------------------------------------------

_fresh_counter = itertools.count(1)


def fresh_name(base: str) -> str:
    """Return a name that no parsed program can contain (user names never hold '$')."""
    stem = base.split("$", 1)[0] or "v"
    return f"{stem}${next(_fresh_counter)}"


# ---------------------------------------------------------------------------
# U types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UTVar:
    name: str


@dataclass(frozen=True)
class UUnitT:
    pass


@dataclass(frozen=True)
class UProd:
    left: "UType"
    right: "UType"


@dataclass(frozen=True)
class UFun:
    arg: "UType"
    res: "UType"


@dataclass(frozen=True)
class USum:
    left: "UType"
    right: "UType"


@dataclass(frozen=True)
class UMu:
    var: str
    body: "UType"


@dataclass(frozen=True)
class UForall:
    var: str
    body: "UType"


UType = Union[UTVar, UUnitT, UProd, UFun, USum, UMu, UForall]
U_UNIT = UUnitT()


def utype_ftv(t: UType) -> frozenset:
    """Free type variables of a U type."""
    if isinstance(t, UTVar):
        return frozenset((t.name,))
    if isinstance(t, UUnitT):
        return frozenset()
    if isinstance(t, (UProd, USum)):
        return utype_ftv(t.left) | utype_ftv(t.right)
    if isinstance(t, UFun):
        return utype_ftv(t.arg) | utype_ftv(t.res)
    if isinstance(t, (UMu, UForall)):
        return utype_ftv(t.body) - {t.var}
    raise TypeError(f"not a U type: {t!r}")


def subst_utype(t: UType, var: str, repl: UType) -> UType:
    """Capture-avoiding substitution ``t[repl/var]``."""
    if isinstance(t, UTVar):
        return repl if t.name == var else t
    if isinstance(t, UUnitT):
        return t
    if isinstance(t, UProd):
        return UProd(subst_utype(t.left, var, repl), subst_utype(t.right, var, repl))
    if isinstance(t, USum):
        return USum(subst_utype(t.left, var, repl), subst_utype(t.right, var, repl))
    if isinstance(t, UFun):
        return UFun(subst_utype(t.arg, var, repl), subst_utype(t.res, var, repl))
    if isinstance(t, (UMu, UForall)):
        if t.var == var or var not in utype_ftv(t.body):
            return t
        bound, body = t.var, t.body
        if bound in utype_ftv(repl):
            new = fresh_name(bound)
            body = subst_utype(body, bound, UTVar(new))
            bound = new
        return type(t)(bound, subst_utype(body, var, repl))
    raise TypeError(f"not a U type: {t!r}")


def unfold_umu(t: UMu) -> UType:
    return subst_utype(t.body, t.var, t)


def _ueq(a: UType, b: UType, ea: dict, eb: dict, depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, UTVar):
        la, lb = ea.get(a.name), eb.get(b.name)
        if la is None and lb is None:
            return a.name == b.name
        return la == lb
    if isinstance(a, UUnitT):
        return True
    if isinstance(a, (UProd, USum)):
        return _ueq(a.left, b.left, ea, eb, depth) and _ueq(a.right, b.right, ea, eb, depth)
    if isinstance(a, UFun):
        return _ueq(a.arg, b.arg, ea, eb, depth) and _ueq(a.res, b.res, ea, eb, depth)
    if isinstance(a, (UMu, UForall)):
        return _ueq(a.body, b.body, {**ea, a.var: depth}, {**eb, b.var: depth}, depth + 1)
    raise TypeError(f"not a U type: {a!r}")


def utype_eq(a: UType, b: UType) -> bool:
    """Alpha-equivalence of U types."""
    return a == b or _ueq(a, b, {}, {}, 0)


# ---------------------------------------------------------------------------
# L types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LOne:
    pass


@dataclass(frozen=True)
class LTensor:
    left: "LType"
    right: "LType"


@dataclass(frozen=True)
class LLolli:
    arg: "LType"
    res: "LType"


@dataclass(frozen=True)
class LPlus:
    left: "LType"
    right: "LType"


@dataclass(frozen=True)
class LMu:
    var: str
    body: "LType"


@dataclass(frozen=True)
class LTVar:
    name: str


@dataclass(frozen=True)
class LBang:
    body: "LType"


@dataclass(frozen=True)
class LBox:
    body: "LType"


@dataclass(frozen=True)
class LBox0:
    pass


@dataclass(frozen=True)
class LLumpT:
    """The lump type: an opaque L-side wrapper around a U type."""

    utype: UType


LType = Union[LOne, LTensor, LLolli, LPlus, LMu, LTVar, LBang, LBox, LBox0, LLumpT]
L_ONE = LOne()
L_BOX0 = LBox0()


def duplicable(t: LType) -> bool:
    return isinstance(t, LBang)


def ltype_ftv(t: LType) -> frozenset:
    """Free L type variables (U variables inside lumps are not included)."""
    if isinstance(t, LTVar):
        return frozenset((t.name,))
    if isinstance(t, (LOne, LBox0, LLumpT)):
        return frozenset()
    if isinstance(t, (LTensor, LPlus)):
        return ltype_ftv(t.left) | ltype_ftv(t.right)
    if isinstance(t, LLolli):
        return ltype_ftv(t.arg) | ltype_ftv(t.res)
    if isinstance(t, (LBang, LBox)):
        return ltype_ftv(t.body)
    if isinstance(t, LMu):
        return ltype_ftv(t.body) - {t.var}
    raise TypeError(f"not an L type: {t!r}")


def ltype_uftv(t: LType) -> frozenset:
    """Free U type variables occurring inside lump payloads."""
    if isinstance(t, LLumpT):
        return utype_ftv(t.utype)
    if isinstance(t, (LOne, LBox0, LTVar)):
        return frozenset()
    if isinstance(t, (LTensor, LPlus)):
        return ltype_uftv(t.left) | ltype_uftv(t.right)
    if isinstance(t, LLolli):
        return ltype_uftv(t.arg) | ltype_uftv(t.res)
    if isinstance(t, (LBang, LBox, LMu)):
        return ltype_uftv(t.body)
    raise TypeError(f"not an L type: {t!r}")


def _lmap(t: LType, f) -> LType:
    """Rebuild ``t`` applying ``f`` to immediate L-type children."""
    if isinstance(t, LTensor):
        return LTensor(f(t.left), f(t.right))
    if isinstance(t, LPlus):
        return LPlus(f(t.left), f(t.right))
    if isinstance(t, LLolli):
        return LLolli(f(t.arg), f(t.res))
    if isinstance(t, LBang):
        return LBang(f(t.body))
    if isinstance(t, LBox):
        return LBox(f(t.body))
    return t


def subst_ltype(t: LType, var: str, repl: LType) -> LType:
    """Capture-avoiding substitution of an L type variable."""
    if isinstance(t, LTVar):
        return repl if t.name == var else t
    if isinstance(t, LMu):
        if t.var == var or var not in ltype_ftv(t.body):
            return t
        bound, body = t.var, t.body
        if bound in ltype_ftv(repl):
            new = fresh_name(bound)
            body = subst_ltype(body, bound, LTVar(new))
            bound = new
        return LMu(bound, subst_ltype(body, var, repl))
    return _lmap(t, lambda c: subst_ltype(c, var, repl))


def subst_utype_in_ltype(t: LType, var: str, repl: UType) -> LType:
    """Substitute a U type variable inside the lump payloads of an L type."""
    if isinstance(t, LLumpT):
        return LLumpT(subst_utype(t.utype, var, repl))
    if isinstance(t, LMu):
        return LMu(t.var, subst_utype_in_ltype(t.body, var, repl))
    return _lmap(t, lambda c: subst_utype_in_ltype(c, var, repl))


def unfold_lmu(t: LMu) -> LType:
    return subst_ltype(t.body, t.var, t)


def _leq(a: LType, b: LType, ea: dict, eb: dict, depth: int, ua: dict, ub: dict) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, LTVar):
        la, lb = ea.get(a.name), eb.get(b.name)
        if la is None and lb is None:
            return a.name == b.name
        return la == lb
    if isinstance(a, (LOne, LBox0)):
        return True
    if isinstance(a, LLumpT):
        return _ueq(a.utype, b.utype, ua, ub, 10_000 + len(ua))
    if isinstance(a, (LTensor, LPlus)):
        return _leq(a.left, b.left, ea, eb, depth, ua, ub) and _leq(a.right, b.right, ea, eb, depth, ua, ub)
    if isinstance(a, LLolli):
        return _leq(a.arg, b.arg, ea, eb, depth, ua, ub) and _leq(a.res, b.res, ea, eb, depth, ua, ub)
    if isinstance(a, (LBang, LBox)):
        return _leq(a.body, b.body, ea, eb, depth, ua, ub)
    if isinstance(a, LMu):
        return _leq(a.body, b.body, {**ea, a.var: depth}, {**eb, b.var: depth}, depth + 1, ua, ub)
    raise TypeError(f"not an L type: {a!r}")


def ltype_eq(a: LType, b: LType) -> bool:
    """Alpha-equivalence of L types (including the U types inside lumps)."""
    return a == b or _leq(a, b, {}, {}, 0, {}, {})


def ltype_size(t: LType) -> int:
    if isinstance(t, (LOne, LBox0, LTVar, LLumpT)):
        return 1
    if isinstance(t, (LTensor, LPlus)):
        return 1 + ltype_size(t.left) + ltype_size(t.right)
    if isinstance(t, LLolli):
        return 1 + ltype_size(t.arg) + ltype_size(t.res)
    return 1 + ltype_size(t.body)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


class Expr:
    """Common base of U and L expression nodes."""

    is_value: bool = False

    @cached_property
    def fv(self) -> frozenset:
        return _free_vars(self)

    @cached_property
    def locs(self) -> frozenset:
        return _free_locs(self)


class UExprBase(Expr):
    pass


class LExprBase(Expr):
    pass


def _set_value(node: Expr, flag: bool) -> None:
    object.__setattr__(node, "is_value", flag)


# --- U expressions ---------------------------------------------------------


@dataclass(frozen=True)
class UVar(UExprBase):
    name: str
    is_value = True


@dataclass(frozen=True)
class UUnitV(UExprBase):
    is_value = True


@dataclass(frozen=True)
class UPair(UExprBase):
    left: "UExpr"
    right: "UExpr"

    def __post_init__(self):
        _set_value(self, self.left.is_value and self.right.is_value)


@dataclass(frozen=True)
class UFst(UExprBase):
    body: "UExpr"


@dataclass(frozen=True)
class USnd(UExprBase):
    body: "UExpr"


@dataclass(frozen=True)
class ULetUnit(UExprBase):
    bound: "UExpr"
    body: "UExpr"


@dataclass(frozen=True)
class ULam(UExprBase):
    var: str
    ty: UType
    body: "UExpr"
    is_value = True


@dataclass(frozen=True)
class UApp(UExprBase):
    fn: "UExpr"
    arg: "UExpr"


@dataclass(frozen=True)
class UInj(UExprBase):
    """``inl[T] e`` (index 0) or ``inr[T] e`` (index 1); ``ty`` is the whole sum type."""

    index: int
    ty: UType
    body: "UExpr"

    def __post_init__(self):
        _set_value(self, self.body.is_value)


@dataclass(frozen=True)
class UCase(UExprBase):
    scrut: "UExpr"
    lvar: str
    lbody: "UExpr"
    rvar: str
    rbody: "UExpr"


@dataclass(frozen=True)
class UFold(UExprBase):
    ty: UType
    body: "UExpr"

    def __post_init__(self):
        _set_value(self, self.body.is_value)


@dataclass(frozen=True)
class UUnfold(UExprBase):
    body: "UExpr"


@dataclass(frozen=True)
class UTLam(UExprBase):
    var: str
    body: "UExpr"
    is_value = True


@dataclass(frozen=True)
class UTApp(UExprBase):
    body: "UExpr"
    ty: UType


@dataclass(frozen=True)
class UL(UExprBase):
    """Boundary embedding an L configuration in U; surface programs use an empty store."""

    store: "Store"
    body: "LExpr"


@dataclass(frozen=True)
class UFix(UExprBase):
    """Source-level ``fix (f : A -> B) -> e``; removed by elaboration."""

    var: str
    ty: UType
    body: "UExpr"


@dataclass(frozen=True)
class UHole(UExprBase):
    """A typed hole, used to represent program contexts."""

    ty: UType


# --- L expressions ---------------------------------------------------------


@dataclass(frozen=True)
class LVar(LExprBase):
    name: str
    is_value = True


@dataclass(frozen=True)
class LUnitV(LExprBase):
    is_value = True


@dataclass(frozen=True)
class LPair(LExprBase):
    left: "LExpr"
    right: "LExpr"

    def __post_init__(self):
        _set_value(self, self.left.is_value and self.right.is_value)


@dataclass(frozen=True)
class LLetPair(LExprBase):
    lvar: str
    rvar: str
    bound: "LExpr"
    body: "LExpr"


@dataclass(frozen=True)
class LLetUnit(LExprBase):
    bound: "LExpr"
    body: "LExpr"


@dataclass(frozen=True)
class LLam(LExprBase):
    var: str
    ty: LType
    body: "LExpr"
    is_value = True


@dataclass(frozen=True)
class LApp(LExprBase):
    fn: "LExpr"
    arg: "LExpr"


@dataclass(frozen=True)
class LInj(LExprBase):
    index: int
    ty: LType
    body: "LExpr"

    def __post_init__(self):
        _set_value(self, self.body.is_value)


@dataclass(frozen=True)
class LCase(LExprBase):
    scrut: "LExpr"
    lvar: str
    lbody: "LExpr"
    rvar: str
    rbody: "LExpr"


@dataclass(frozen=True)
class LFold(LExprBase):
    ty: LType
    body: "LExpr"

    def __post_init__(self):
        _set_value(self, self.body.is_value)


@dataclass(frozen=True)
class LUnfold(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LShare(LExprBase):
    """``share e`` capturing a local store whose locations are bound here."""

    store: "Store"
    body: "LExpr"

    def __post_init__(self):
        _set_value(self, self.body.is_value)


@dataclass(frozen=True)
class LCopy(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LNew(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LFree(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LBoxE(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LUnboxE(LExprBase):
    body: "LExpr"


@dataclass(frozen=True)
class LLoc(LExprBase):
    loc: int
    is_value = True


@dataclass(frozen=True)
class LLumpVal(LExprBase):
    """A lumped U value; only produced by reduction."""

    value: "UExpr"
    is_value = True


@dataclass(frozen=True)
class LU(LExprBase):
    """Boundary embedding a U term in L."""

    body: "UExpr"


@dataclass(frozen=True)
class LUnlumpOp(LExprBase):
    ty: LType
    body: "LExpr"


@dataclass(frozen=True)
class LLumpOp(LExprBase):
    ty: LType
    body: "LExpr"


@dataclass(frozen=True)
class LPhase(LExprBase):
    """Transparent marker that attributes evaluation statistics to a named phase."""

    name: str
    body: "LExpr"


@dataclass(frozen=True)
class LFix(LExprBase):
    """Source-level ``fix (f : !(A -o B)) -o e``; removed by elaboration."""

    var: str
    ty: LType
    body: "LExpr"


@dataclass(frozen=True)
class LInst(LExprBase):
    """Instantiation ``name[t, ...]`` of a type-parameterised L definition."""

    name: str
    tys: tuple


UExpr = Union[UVar, UUnitV, UPair, UFst, USnd, ULetUnit, ULam, UApp, UInj, UCase, UFold,
              UUnfold, UTLam, UTApp, UL, UFix, UHole]
LExpr = Union[LVar, LUnitV, LPair, LLetPair, LLetUnit, LLam, LApp, LInj, LCase, LFold, LUnfold,
              LShare, LCopy, LNew, LFree, LBoxE, LUnboxE, LLoc, LLumpVal, LU, LUnlumpOp, LLumpOp,
              LPhase, LFix, LInst]

U_UNITV = UUnitV()
L_UNITV = LUnitV()


def is_u_expr(e) -> bool:
    return isinstance(e, UExprBase)


def is_l_expr(e) -> bool:
    return isinstance(e, LExprBase)


def is_value(e: Expr) -> bool:
    return e.is_value


# ---------------------------------------------------------------------------
# Stores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Empty:
    """An empty cell ``ℓ ↦ ε``."""


@dataclass(frozen=True)
class Full:
    """A full cell holding a value together with the local store that value owns."""

    value: "LExpr"
    local: "Store"


EMPTY = Empty()
Slot = Union[Empty, Full]


class Store:
    """Immutable finite map from locations to slots."""

    __slots__ = ("_cells",)

    def __init__(self, cells: Optional[Mapping[int, Slot]] = None):
        self._cells = dict(cells) if cells else {}

    def __eq__(self, other):
        return isinstance(other, Store) and self._cells == other._cells

    def __hash__(self):
        return hash(frozenset(self._cells.items()))

    def __repr__(self):
        return f"Store({self._cells!r})"

    def __len__(self):
        return len(self._cells)

    def __bool__(self):
        return bool(self._cells)

    def __iter__(self) -> Iterator[int]:
        return iter(self._cells)

    def __contains__(self, loc) -> bool:
        return loc in self._cells

    def get(self, loc: int) -> Optional[Slot]:
        return self._cells.get(loc)

    def items(self):
        return self._cells.items()

    def domain(self) -> frozenset:
        return frozenset(self._cells)

    def with_cell(self, loc: int, slot: Slot) -> "Store":
        cells = dict(self._cells)
        cells[loc] = slot
        return Store(cells)

    def without(self, locs: Iterable[int]) -> "Store":
        cells = dict(self._cells)
        for loc in locs:
            del cells[loc]
        return Store(cells)

    def restrict(self, locs: Iterable[int]) -> "Store":
        return Store({loc: self._cells[loc] for loc in locs if loc in self._cells})

    def join(self, other: "Store") -> "Store":
        return join_store(self, other)

    def all_locations(self) -> list:
        """Every location in this store and, recursively, in the local stores of full cells."""
        out = []
        for loc, slot in self._cells.items():
            out.append(loc)
            if isinstance(slot, Full):
                out.extend(slot.local.all_locations())
        return out


EMPTY_STORE = Store()


class StoreOverlap(ValueError):
    pass


def join_store(a: Store, b: Store) -> Store:
    """Disjoint union of two stores; raises StoreOverlap when domains intersect."""
    if not a:
        return b
    if not b:
        return a
    clash = a.domain() & b.domain()
    if clash:
        raise StoreOverlap(f"stores overlap on {sorted(clash)}")
    cells = dict(a.items())
    cells.update(b.items())
    return Store(cells)


@dataclass(frozen=True)
class Configuration:
    store: Store
    expr: "LExpr"


# ---------------------------------------------------------------------------
# Contexts and store typings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UVarEntry:
    name: str
    ty: UType


@dataclass(frozen=True)
class LVarEntry:
    name: str
    ty: LType


@dataclass(frozen=True)
class UTyVarEntry:
    name: str


@dataclass(frozen=True)
class LTyVarEntry:
    """An abstract L type parameter of a template definition."""

    name: str


Entry = Union[UVarEntry, LVarEntry, UTyVarEntry, LTyVarEntry]


class MixedContext:
    """Ordered typing context of U variables, L variables and type variables.

    Extending with a name that is already present replaces (shadows) the old
    entry, so names stay unique.
    """

    __slots__ = ("entries", "_vars", "_utv", "_ltv")

    def __init__(self, entries: Iterable[Entry] = ()):
        self.entries: tuple = tuple(entries)
        self._vars: dict = {}
        utv, ltv = set(), set()
        for ent in self.entries:
            if isinstance(ent, (UVarEntry, LVarEntry)):
                self._vars[ent.name] = ent
            elif isinstance(ent, UTyVarEntry):
                utv.add(ent.name)
            else:
                ltv.add(ent.name)
        self._utv = frozenset(utv)
        self._ltv = frozenset(ltv)

    def __repr__(self):
        return f"MixedContext({list(self.entries)!r})"

    def __eq__(self, other):
        return isinstance(other, MixedContext) and set(self.entries) == set(other.entries)

    def __hash__(self):
        return hash(frozenset(self.entries))

    def __len__(self):
        return len(self.entries)

    def lookup(self, name: str) -> Optional[Entry]:
        return self._vars.get(name)

    def has_utyvar(self, name: str) -> bool:
        return name in self._utv

    @property
    def utyvars(self) -> frozenset:
        return self._utv

    @property
    def ltyvars(self) -> frozenset:
        return self._ltv

    def _extend(self, ent: Entry) -> "MixedContext":
        if isinstance(ent, (UVarEntry, LVarEntry)):
            kept = [e for e in self.entries
                    if not (isinstance(e, (UVarEntry, LVarEntry)) and e.name == ent.name)]
        else:
            kept = [e for e in self.entries if e != ent]
        new = MixedContext.__new__(MixedContext)
        new.entries = tuple(kept) + (ent,)
        new._vars = dict(self._vars)
        new._utv, new._ltv = self._utv, self._ltv
        if isinstance(ent, (UVarEntry, LVarEntry)):
            new._vars[ent.name] = ent
        elif isinstance(ent, UTyVarEntry):
            new._utv = self._utv | {ent.name}
        else:
            new._ltv = self._ltv | {ent.name}
        return new

    def add_u(self, name: str, ty: UType) -> "MixedContext":
        return self._extend(UVarEntry(name, ty))

    def add_l(self, name: str, ty: LType) -> "MixedContext":
        return self._extend(LVarEntry(name, ty))

    def add_utyvar(self, name: str) -> "MixedContext":
        return self._extend(UTyVarEntry(name))

    def add_ltyvar(self, name: str) -> "MixedContext":
        return self._extend(LTyVarEntry(name))

    def linear_vars(self) -> frozenset:
        return frozenset(e.name for e in self.entries
                         if isinstance(e, LVarEntry) and not duplicable(e.ty))

    def var_names(self) -> frozenset:
        return frozenset(self._vars)


EMPTY_CTX = MixedContext()


def bang(ctx: MixedContext) -> MixedContext:
    """Apply ``!`` to the linear variables of a context, leaving everything else."""
    return MixedContext(
        LVarEntry(e.name, LBang(e.ty)) if isinstance(e, LVarEntry) and not duplicable(e.ty) else e
        for e in ctx.entries)


@dataclass(frozen=True)
class Dead:
    """Store-typing entry of an empty cell."""


@dataclass(frozen=True)
class Alive:
    """Store-typing entry of a full cell: owned context, local store typing, content type."""

    ctx: MixedContext
    storety: "StoreTyping"
    ty: LType


class StoreTyping:
    """Immutable finite map from locations to Dead/Alive entries."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Optional[Mapping[int, Union[Dead, Alive]]] = None):
        self._entries = dict(entries) if entries else {}

    def __eq__(self, other):
        if not isinstance(other, StoreTyping) or self._entries.keys() != other._entries.keys():
            return False
        for loc, a in self._entries.items():
            b = other._entries[loc]
            if type(a) is not type(b):
                return False
            if isinstance(a, Alive) and not (a.storety == b.storety and ltype_eq(a.ty, b.ty)
                                             and a.ctx == b.ctx):
                return False
        return True

    def __hash__(self):
        return hash(frozenset(self._entries))

    def __repr__(self):
        return f"StoreTyping({self._entries!r})"

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def get(self, loc):
        return self._entries.get(loc)

    def items(self):
        return self._entries.items()

    def domain(self) -> frozenset:
        return frozenset(self._entries)


def join_storety(a: StoreTyping, b: StoreTyping) -> StoreTyping:
    clash = a.domain() & b.domain()
    if clash:
        raise StoreOverlap(f"store typings overlap on {sorted(clash)}")
    merged = dict(a.items())
    merged.update(b.items())
    return StoreTyping(merged)


# ---------------------------------------------------------------------------
# Free variables and free locations
# ---------------------------------------------------------------------------


def _store_fv(store: Store) -> frozenset:
    out = frozenset()
    for _, slot in store.items():
        if isinstance(slot, Full):
            out |= slot.value.fv | _store_fv(slot.local)
    return out


def _free_vars(e: Expr) -> frozenset:
    if isinstance(e, (UVar, LVar)):
        return frozenset((e.name,))
    if isinstance(e, (UUnitV, LUnitV, LLoc, UHole, LInst)):
        return frozenset()
    if isinstance(e, (UPair, LPair)):
        return e.left.fv | e.right.fv
    if isinstance(e, (UApp, LApp)):
        return e.fn.fv | e.arg.fv
    if isinstance(e, (ULetUnit, LLetUnit)):
        return e.bound.fv | e.body.fv
    if isinstance(e, (ULam, LLam, UFix, LFix)):
        return e.body.fv - {e.var}
    if isinstance(e, (UCase, LCase)):
        return e.scrut.fv | (e.lbody.fv - {e.lvar}) | (e.rbody.fv - {e.rvar})
    if isinstance(e, LLetPair):
        return e.bound.fv | (e.body.fv - {e.lvar, e.rvar})
    if isinstance(e, (UL, LShare)):
        return e.body.fv | _store_fv(e.store)
    if isinstance(e, LLumpVal):
        return e.value.fv
    # remaining nodes have a single ``body`` child
    return e.body.fv


def free_vars(e: Expr) -> frozenset:
    """Free term variables of a U or L expression."""
    return e.fv


def _free_locs(e: Expr) -> frozenset:
    if isinstance(e, LLoc):
        return frozenset((e.loc,))
    if isinstance(e, (UVar, LVar, UUnitV, LUnitV, LShare, UL, UHole, LInst)):
        return frozenset()
    if isinstance(e, (UPair, LPair)):
        return e.left.locs | e.right.locs
    if isinstance(e, (UApp, LApp)):
        return e.fn.locs | e.arg.locs
    if isinstance(e, (ULetUnit, LLetUnit, LLetPair)):
        return e.bound.locs | e.body.locs
    if isinstance(e, (UCase, LCase)):
        return e.scrut.locs | e.lbody.locs | e.rbody.locs
    if isinstance(e, LLumpVal):
        return e.value.locs
    return e.body.locs


def locations_of(x: Union[Expr, Store]) -> frozenset:
    """Free locations of an expression, or the top-level domain of a store."""
    if isinstance(x, Store):
        return x.domain()
    return x.locs


def all_locations(e: Expr) -> set:
    """Every location mentioned anywhere in ``e``, bound or free, including nested stores."""
    out: set = set()

    def store(s: Store):
        for loc, slot in s.items():
            out.add(loc)
            if isinstance(slot, Full):
                walk(slot.value)
                store(slot.local)

    def walk(x):
        if isinstance(x, LLoc):
            out.add(x.loc)
        elif isinstance(x, (UL, LShare)):
            store(x.store)
            walk(x.body)
        else:
            for c in children(x):
                walk(c)

    walk(e)
    return out


def children(e: Expr) -> tuple:
    """Immediate subexpressions (stores excluded)."""
    if isinstance(e, (UVar, LVar, UUnitV, LUnitV, LLoc, UHole, LInst)):
        return ()
    if isinstance(e, (UPair, LPair)):
        return (e.left, e.right)
    if isinstance(e, (UApp, LApp)):
        return (e.fn, e.arg)
    if isinstance(e, (ULetUnit, LLetUnit, LLetPair)):
        return (e.bound, e.body)
    if isinstance(e, (UCase, LCase)):
        return (e.scrut, e.lbody, e.rbody)
    if isinstance(e, LLumpVal):
        return (e.value,)
    return (e.body,)


def expr_size(e: Expr) -> int:
    n = 1 + sum(expr_size(c) for c in children(e))
    if isinstance(e, (UL, LShare)):
        n += store_size(e.store)
    return n


def store_size(s: Store) -> int:
    n = 0
    for _, slot in s.items():
        n += 1
        if isinstance(slot, Full):
            n += expr_size(slot.value) + store_size(slot.local)
    return n


# ---------------------------------------------------------------------------
# Term substitution
# ---------------------------------------------------------------------------


def _rename_binder(var: str, body: Expr, avoid: frozenset):
    if var in avoid:
        new = fresh_name(var)
        return new, subst(body, var, UVar(new) if isinstance(body, UExprBase) else LVar(new))
    return var, body


def _subst_store(store: Store, x: str, v: Expr) -> Store:
    if x not in _store_fv(store):
        return store
    cells = {}
    for loc, slot in store.items():
        if isinstance(slot, Full):
            slot = Full(subst(slot.value, x, v), _subst_store(slot.local, x, v))
        cells[loc] = slot
    return Store(cells)


def _var_like(name: str, e: Expr) -> Expr:
    return UVar(name) if isinstance(e, UExprBase) else LVar(name)


def subst(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution ``e[v/x]``.

    Variables of both languages share one namespace, so a binder of either
    language shadows ``x``.  A variable occurrence is replaced by ``v`` as-is;
    callers substituting into an L position pass an L expression and vice versa.
    """
    if x not in e.fv:
        return e
    t = type(e)
    if t is UVar or t is LVar:
        return v
    if t is UPair or t is LPair:
        return t(subst(e.left, x, v), subst(e.right, x, v))
    if t is UApp or t is LApp:
        return t(subst(e.fn, x, v), subst(e.arg, x, v))
    if t is ULetUnit or t is LLetUnit:
        return t(subst(e.bound, x, v), subst(e.body, x, v))
    if t is ULam or t is LLam or t is UFix or t is LFix:
        if e.var == x:
            return e
        var, body = e.var, e.body
        if var in v.fv:
            new = fresh_name(var)
            body = subst(body, var, _var_like(new, body))
            var = new
        return t(var, e.ty, subst(body, x, v))
    if t is UCase or t is LCase:
        return t(subst(e.scrut, x, v), *_subst_arm(e.lvar, e.lbody, x, v),
                 *_subst_arm(e.rvar, e.rbody, x, v))
    if t is LLetPair:
        bound = subst(e.bound, x, v)
        if x in (e.lvar, e.rvar):
            return LLetPair(e.lvar, e.rvar, bound, e.body)
        lv, rv, body = e.lvar, e.rvar, e.body
        if lv in v.fv:
            new = fresh_name(lv)
            body = subst(body, lv, LVar(new))
            lv = new
        if rv in v.fv:
            new = fresh_name(rv)
            body = subst(body, rv, LVar(new))
            rv = new
        return LLetPair(lv, rv, bound, subst(body, x, v))
    if t is UL or t is LShare:
        return t(_subst_store(e.store, x, v), subst(e.body, x, v))
    if t is LLumpVal:
        return LLumpVal(subst(e.value, x, v))
    if t is UInj or t is LInj:
        return t(e.index, e.ty, subst(e.body, x, v))
    if t is UFold or t is LFold or t is LUnlumpOp or t is LLumpOp:
        return t(e.ty, subst(e.body, x, v))
    if t is UTLam:
        return UTLam(e.var, subst(e.body, x, v))
    if t is UTApp:
        return UTApp(subst(e.body, x, v), e.ty)
    if t is LPhase:
        return LPhase(e.name, subst(e.body, x, v))
    return t(subst(e.body, x, v))


def _subst_arm(var: str, body: Expr, x: str, v: Expr):
    if var == x:
        return var, body
    if var in v.fv:
        new = fresh_name(var)
        body = subst(body, var, _var_like(new, body))
        var = new
    return var, subst(body, x, v)


def subst_many(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    for x, v in mapping.items():
        e = subst(e, x, v)
    return e


# ---------------------------------------------------------------------------
# Type substitution inside terms
# ---------------------------------------------------------------------------


def subst_ty(e: Expr, a: str, ty: UType) -> Expr:
    """Substitute the U type ``ty`` for the type variable ``a`` throughout ``e``."""
    ftv_ty = utype_ftv(ty)

    def su(t):
        return subst_utype(t, a, ty)

    def sl(t):
        return subst_utype_in_ltype(t, a, ty)

    def sstore(s: Store) -> Store:
        if not s:
            return s
        return Store({loc: (Full(go(sl_.value), sstore(sl_.local)) if isinstance(sl_, Full) else sl_)
                      for loc, sl_ in s.items()})

    def go(x):
        t = type(x)
        if t in (UVar, LVar, UUnitV, LUnitV, LLoc):
            return x
        if t is UTLam:
            if x.var == a:
                return x
            var, body = x.var, x.body
            if var in ftv_ty:
                new = fresh_name(var)
                body = subst_ty(body, var, UTVar(new))
                var = new
            return UTLam(var, go(body))
        if t in (ULam, UFix):
            return t(x.var, su(x.ty), go(x.body))
        if t in (LLam, LFix):
            return t(x.var, sl(x.ty), go(x.body))
        if t is UInj:
            return UInj(x.index, su(x.ty), go(x.body))
        if t is LInj:
            return LInj(x.index, sl(x.ty), go(x.body))
        if t is UFold:
            return UFold(su(x.ty), go(x.body))
        if t in (LFold, LUnlumpOp, LLumpOp):
            return t(sl(x.ty), go(x.body))
        if t is UTApp:
            return UTApp(go(x.body), su(x.ty))
        if t is UHole:
            return UHole(su(x.ty))
        if t is LInst:
            return LInst(x.name, tuple(sl(s) for s in x.tys))
        if t in (UL, LShare):
            return t(sstore(x.store), go(x.body))
        return rebuild(x, [go(c) for c in children(x)])

    return go(e)


def subst_lty(e: Expr, b: str, ty: LType) -> Expr:
    """Substitute the L type ``ty`` for the L type variable ``b`` in annotations of ``e``."""

    def sl(t):
        return subst_ltype(t, b, ty)

    def sstore(s: Store) -> Store:
        if not s:
            return s
        return Store({loc: (Full(go(c.value), sstore(c.local)) if isinstance(c, Full) else c)
                      for loc, c in s.items()})

    def go(x):
        t = type(x)
        if t in (LLam, LFix):
            return t(x.var, sl(x.ty), go(x.body))
        if t is LInj:
            return LInj(x.index, sl(x.ty), go(x.body))
        if t in (LFold, LUnlumpOp, LLumpOp):
            return t(sl(x.ty), go(x.body))
        if t is LInst:
            return LInst(x.name, tuple(sl(s) for s in x.tys))
        if t in (UL, LShare):
            return t(sstore(x.store), go(x.body))
        return rebuild(x, [go(c) for c in children(x)])

    return go(e)


def rebuild(e: Expr, kids: list) -> Expr:
    """Rebuild ``e`` with new children (in the order returned by ``children``)."""
    t = type(e)
    if not kids:
        return e
    if t in (UPair, LPair, UApp, LApp, ULetUnit, LLetUnit):
        if kids[0] is children(e)[0] and kids[1] is children(e)[1]:
            return e
        return t(kids[0], kids[1])
    if t is LLetPair:
        return LLetPair(e.lvar, e.rvar, kids[0], kids[1])
    if t in (UCase, LCase):
        return t(kids[0], e.lvar, kids[1], e.rvar, kids[2])
    if t in (ULam, LLam, UFix, LFix):
        return t(e.var, e.ty, kids[0])
    if t in (UInj, LInj):
        return t(e.index, e.ty, kids[0])
    if t in (UFold, LFold, LUnlumpOp, LLumpOp):
        return t(e.ty, kids[0])
    if t is UTLam:
        return UTLam(e.var, kids[0])
    if t is UTApp:
        return UTApp(kids[0], e.ty)
    if t in (UL, LShare):
        return t(e.store, kids[0])
    if t is LLumpVal:
        return LLumpVal(kids[0])
    if t is LPhase:
        return LPhase(e.name, kids[0])
    return t(kids[0])


# ---------------------------------------------------------------------------
# Location renaming
# ---------------------------------------------------------------------------


def rename_locations(e: Expr, mapping: Mapping[int, int]) -> Expr:
    """Rename free locations of ``e`` (bound ones under share/UL are left alone)."""
    if not mapping or not (e.locs & mapping.keys()):
        return e
    if isinstance(e, LLoc):
        return LLoc(mapping.get(e.loc, e.loc))
    return rebuild(e, [rename_locations(c, mapping) for c in children(e)])


def rename_store(store: Store, mapping: Mapping[int, int]) -> Store:
    """Rename the top-level domain of ``store`` and the matching free occurrences."""
    cells = {}
    for loc, slot in store.items():
        cells[mapping.get(loc, loc)] = slot
    return Store(cells)


def freshen(store: Store, e: Expr, supply) -> tuple:
    """Give every location of ``store`` (recursively through full cells) a fresh name.

    Returns the renamed store and ``e`` with its free locations renamed to match.
    """
    mapping = {loc: supply() for loc in store}
    cells = {}
    for loc, slot in store.items():
        if isinstance(slot, Full):
            local, value = freshen(slot.local, slot.value, supply)
            slot = Full(value, local)
        cells[mapping[loc]] = slot
    return Store(cells), rename_locations(e, mapping)


# ---------------------------------------------------------------------------
# Surface fragment
# ---------------------------------------------------------------------------


def is_surface(e: Expr) -> bool:
    """True when ``e`` contains no locations, lump values or non-empty captured stores."""
    if isinstance(e, (LLoc, LLumpVal)):
        return False
    if isinstance(e, (LShare, UL)) and e.store:
        return False
    return all(is_surface(c) for c in children(e))


# ---------------------------------------------------------------------------
# Alpha-equivalence
# ---------------------------------------------------------------------------


class _AlphaEnv:
    __slots__ = ("va", "vb", "ta", "tb", "n")

    def __init__(self):
        self.va, self.vb, self.ta, self.tb, self.n = {}, {}, {}, {}, 0


def alpha_eq(a, b) -> bool:
    """Alpha-equivalence of expressions, types, stores or configurations."""
    if isinstance(a, Configuration) and isinstance(b, Configuration):
        return _store_alpha(a.store, b.store, {}, {}, {}, {}, 0) and _alpha(a.expr, b.expr, {}, {}, {}, {}, 0)
    if isinstance(a, Store) and isinstance(b, Store):
        return _store_alpha(a, b, {}, {}, {}, {}, 0)
    if isinstance(a, Expr) and isinstance(b, Expr):
        return _alpha(a, b, {}, {}, {}, {}, 0)
    if isinstance(a, (UTVar, UUnitT, UProd, UFun, USum, UMu, UForall)):
        return type(b) in (UTVar, UUnitT, UProd, UFun, USum, UMu, UForall) and utype_eq(a, b)
    return ltype_eq(a, b)


def _store_alpha(a: Store, b: Store, va, vb, ta, tb, n) -> bool:
    if a.domain() != b.domain():
        return False
    for loc, sa in a.items():
        sb = b.get(loc)
        if type(sa) is not type(sb):
            return False
        if isinstance(sa, Full):
            if not (_alpha(sa.value, sb.value, va, vb, ta, tb, n)
                    and _store_alpha(sa.local, sb.local, va, vb, ta, tb, n)):
                return False
    return True


def _alpha(a, b, va, vb, ta, tb, n) -> bool:
    t = type(a)
    if t is not type(b):
        return False
    if t is UVar or t is LVar:
        ia, ib = va.get(a.name), vb.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    if t in (UUnitV, LUnitV):
        return True
    if t is LLoc:
        return a.loc == b.loc
    if t in (ULam, UFix):
        return (_ueq(a.ty, b.ty, ta, tb, 10_000 + n)
                and _alpha(a.body, b.body, {**va, a.var: n}, {**vb, b.var: n}, ta, tb, n + 1))
    if t in (LLam, LFix):
        return (_leq(a.ty, b.ty, {}, {}, 0, ta, tb)
                and _alpha(a.body, b.body, {**va, a.var: n}, {**vb, b.var: n}, ta, tb, n + 1))
    if t in (UCase, LCase):
        return (_alpha(a.scrut, b.scrut, va, vb, ta, tb, n)
                and _alpha(a.lbody, b.lbody, {**va, a.lvar: n}, {**vb, b.lvar: n}, ta, tb, n + 1)
                and _alpha(a.rbody, b.rbody, {**va, a.rvar: n}, {**vb, b.rvar: n}, ta, tb, n + 1))
    if t is LLetPair:
        return (_alpha(a.bound, b.bound, va, vb, ta, tb, n)
                and _alpha(a.body, b.body, {**va, a.lvar: n, a.rvar: n + 1},
                           {**vb, b.lvar: n, b.rvar: n + 1}, ta, tb, n + 2))
    if t is UTLam:
        return _alpha(a.body, b.body, va, vb, {**ta, a.var: n}, {**tb, b.var: n}, n + 1)
    if t is UTApp:
        return _ueq(a.ty, b.ty, ta, tb, 10_000 + n) and _alpha(a.body, b.body, va, vb, ta, tb, n)
    if t in (UInj, UFold):
        if t is UInj and a.index != b.index:
            return False
        return _ueq(a.ty, b.ty, ta, tb, 10_000 + n) and _alpha(a.body, b.body, va, vb, ta, tb, n)
    if t in (LInj, LFold, LUnlumpOp, LLumpOp):
        if t is LInj and a.index != b.index:
            return False
        return _leq(a.ty, b.ty, {}, {}, 0, ta, tb) and _alpha(a.body, b.body, va, vb, ta, tb, n)
    if t is UHole:
        return _ueq(a.ty, b.ty, ta, tb, 10_000 + n)
    if t is LInst:
        return a.name == b.name and len(a.tys) == len(b.tys) and all(
            _leq(x, y, {}, {}, 0, ta, tb) for x, y in zip(a.tys, b.tys))
    if t in (UL, LShare):
        return (_store_alpha(a.store, b.store, va, vb, ta, tb, n)
                and _alpha(a.body, b.body, va, vb, ta, tb, n))
    if t is LPhase and a.name != b.name:
        return False
    ca, cb = children(a), children(b)
    return all(_alpha(x, y, va, vb, ta, tb, n) for x, y in zip(ca, cb))


def canonical_locations(e: Expr) -> Expr:
    """Rename every location in ``e`` (free or bound) to 0, 1, 2, ... in traversal order."""
    mapping: dict = {}

    def name(loc):
        if loc not in mapping:
            mapping[loc] = len(mapping)
        return mapping[loc]

    def store(s: Store) -> Store:
        for loc in sorted(s, key=lambda l: (l not in mapping, mapping.get(l, 0), l)):
            name(loc)
        cells = {}
        for loc, slot in s.items():
            if isinstance(slot, Full):
                value = go(slot.value)
                slot = Full(value, store(slot.local))
            cells[mapping[loc]] = slot
        return Store(dict(sorted(cells.items())))

    def go(x):
        if isinstance(x, LLoc):
            return LLoc(name(x.loc))
        if isinstance(x, (LShare, UL)):
            body = go(x.body)
            return type(x)(store(x.store), body)
        kids = children(x)
        return rebuild(x, [go(c) for c in kids]) if kids else x

    return go(e)


def equal_up_to_locations(a: Expr, b: Expr) -> bool:
    """Alpha-equivalence modulo a consistent renaming of locations."""
    return alpha_eq(canonical_locations(a), canonical_locations(b))


def pretty(x) -> str:
    """Render any AST node in concrete syntax (see ``ulang.pretty``)."""
    from .pretty import pretty as _pretty

    return _pretty(x)
