import pytest

from ulang.ast import EMPTY_CTX, utype_eq
from ulang.errors import BoundaryTypeNotLumped, NonValueUnderTypeAbstraction, TypeMismatch, UnboundVariable
from ulang.parser import parse_uexpr, parse_utype
from ulang.typecheck_u import typecheck_u


def ty_of(src):
    return typecheck_u(EMPTY_CTX, parse_uexpr(src))


@pytest.mark.parametrize("src, expected", [
    ("fun (x : unit) -> x", "unit -> unit"),
    ("Fun a -> fun (x : a) -> x", "forall a. a -> a"),
    ("UL { LU { () } }", "unit"),
    ("UL { share (copy (LU { () })) }", "unit"),
    ("UL { lump[!Lump(unit)] (LU { () }) }", "unit"),
    ("(fun (p : unit * unit) -> snd p) ((), ())", "unit"),
    ("unfold (fold[mu n. unit + n] (inl[unit + (mu n. unit + n)] ()))", "unit + (mu n. unit + n)"),
])
def test_well_typed(src, expected):
    assert utype_eq(ty_of(src), parse_utype(expected))


def test_boundary_with_list_payload():
    lst = "fold[mu l. unit + unit * l] (inl[unit + unit * (mu l. unit + unit * l)] ())"
    assert utype_eq(ty_of(f"UL {{ LU {{ {lst} }} }}"), parse_utype("mu l. unit + unit * l"))


def test_lu_already_carries_the_bang():
    # LU e has type !Lump(T), so sharing it again overshoots the boundary type
    with pytest.raises(BoundaryTypeNotLumped):
        ty_of("UL { share (LU { () }) }")


def test_fst_of_unit_is_mismatch():
    with pytest.raises(TypeMismatch):
        ty_of("fst ()")


def test_boundary_needs_lumped_bang():
    with pytest.raises(BoundaryTypeNotLumped):
        ty_of("UL { () }")


def test_value_restriction():
    with pytest.raises(NonValueUnderTypeAbstraction):
        ty_of("Fun a -> (fun (x : unit) -> x) ()")


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        ty_of("x")
