import pytest
from hypothesis import given, settings, strategies as st

from ulang.ast import EMPTY_CTX, U_UNIT, U_UNITV, UHole, UL, LU, EMPTY_STORE, alpha_eq, utype_eq
from ulang.corpus import programs
from ulang.eval import run
from ulang.funtrans import check_compositionality, funtrans_expr, funtrans_type, plug
from ulang.parser import elaborate, parse_lexpr, parse_ltype, parse_uexpr, parse_utype
from ulang.pretty import pretty
from ulang.testkit import FIRST_ORDER, Gen
from ulang.typecheck_u import typecheck_u


@pytest.mark.parametrize("t, expected", [
    ("!1", "unit"),
    ("Box !1", "unit * unit"),
    ("Box0", "unit"),
    ("Lump(forall a. a -> a)", "forall a. a -> a"),
    ("!1 -o !1", "unit -> unit"),
    ("mu a. 1 + Box a", "mu a. unit + unit * a"),
])
def test_type_translation(t, expected):
    assert utype_eq(funtrans_type(parse_ltype(t)), parse_utype(expected))


def test_new_translates_to_unit_let():
    assert pretty(funtrans_expr(parse_lexpr("new ()"))) == "let () = () in ()"


def test_unbox_translates_to_unit_and_second_projection():
    e = funtrans_expr(parse_lexpr("fun (b : Box !1) -o unbox b"))
    assert pretty(e) == "fun (b : unit * unit) -> ((), snd b)"


def test_pure_u_is_fixed():
    e = parse_uexpr("(fun (x : unit * unit) -> fst x) ((), ())")
    assert alpha_eq(funtrans_expr(e), e)


@pytest.mark.parametrize("prog", [p for p in programs() if not p.ill_typed], ids=lambda p: p.name)
def test_translation_preserves_type_and_result(prog):
    sf = prog.parse()
    e = elaborate(sf)
    t = funtrans_expr(e)
    assert utype_eq(typecheck_u(EMPTY_CTX, t), typecheck_u(EMPTY_CTX, e))
    direct, oracle = run(e, 20_000), run(t, 200_000)
    assert direct.terminated == oracle.terminated
    if direct.terminated:
        assert alpha_eq(direct.value, oracle.value)


def test_compositionality_examples():
    ctx = UL(EMPTY_STORE, LU(UHole(U_UNIT)))
    assert check_compositionality(ctx, U_UNITV)
    assert check_compositionality(UHole(U_UNIT), parse_uexpr("UL { LU { () } }"))
    assert alpha_eq(plug(ctx, U_UNITV), parse_uexpr("UL { LU { () } }"))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_compositionality_on_generated_pairs(seed):
    import random

    g = Gen(random.Random(seed), hole=0.25)
    context = g.program(random.Random(seed).choice(FIRST_ORDER), 6)
    if g.hole is None:
        return
    filler = g.fill_hole(5)
    assert check_compositionality(context, filler)
