from ulang.ast import (
    EMPTY, EMPTY_STORE, L_ONE, L_UNITV, Full, LBang, LBox, LLam, LLetPair, LLoc, LLolli, LLumpT,
    LPair, LShare, LTensor, LVar, Store, U_UNIT, ULam, UVar, alpha_eq, duplicable, freshen,
    locations_of, ltype_eq, ltype_size,
)
from ulang.parser import parse_lexpr, parse_ltype, parse_uexpr
from ulang.pretty import pretty


def test_free_vars_examples():
    assert LLam("x", L_ONE, LVar("x")).fv == frozenset()
    assert LPair(LVar("x"), LVar("y")).fv == {"x", "y"}
    e = LLetPair("x", "y", LVar("p"), LPair(LVar("x"), LVar("y")))
    assert e.fv == {"p"}


def test_locations_of_examples():
    assert locations_of(LLoc(1)) == {1}
    assert locations_of(LShare(Store({1: EMPTY}), LLoc(1))) == frozenset()
    assert locations_of(LPair(LLoc(1), LLoc(2))) == {1, 2}


def test_store_locations_are_top_level_only():
    inner = Store({2: EMPTY})
    store = Store({1: Full(LLoc(2), inner)})
    assert locations_of(store) == {1}


def test_pretty_examples():
    assert pretty(parse_uexpr("()")) == "()"
    assert pretty(LLolli(parse_ltype("t1"), parse_ltype("t2"))) == "t1 -o t2"


def test_duplicable_is_exactly_bang():
    assert duplicable(LBang(L_ONE))
    assert not duplicable(L_ONE)
    assert not duplicable(LBox(LBang(L_ONE)))
    assert not duplicable(LLumpT(U_UNIT))


def test_alpha_equivalence_ignores_binder_names():
    assert alpha_eq(ULam("x", U_UNIT, UVar("x")), ULam("y", U_UNIT, UVar("y")))
    assert not alpha_eq(ULam("x", U_UNIT, UVar("x")), ULam("y", U_UNIT, UVar("z")))
    assert ltype_eq(parse_ltype("mu a. 1 + a"), parse_ltype("mu b. 1 + b"))


def test_alpha_equivalence_compares_locations_by_name():
    a = parse_lexpr("share with {#1 := empty} #1")
    assert alpha_eq(a, parse_lexpr("share with {#1 := empty} #1"))
    assert not alpha_eq(a, parse_lexpr("share with {#7 := empty} #7"))


def test_freshen_renames_store_and_term_consistently():
    store = Store({1: Full(L_UNITV, EMPTY_STORE)})
    supply = iter(range(100, 200)).__next__
    new_store, e = freshen(store, LPair(LLoc(1), L_UNITV), supply)
    assert new_store.domain() == {100}
    assert locations_of(e) == {100}


def test_ltype_size_counts_nodes():
    assert ltype_size(L_ONE) == 1
    assert ltype_size(LTensor(L_ONE, LBang(L_ONE))) == 4
