import pytest
from hypothesis import given, settings, strategies as st

from ulang.ast import UL, LBoxE, LPair, LShare, LU, LVar, ULam, UUnitT, UUnitV, alpha_eq
from ulang.corpus import programs
from ulang.errors import ParseError, UnboundName
from ulang.eval import run
from ulang.parser import elaborate, parse, parse_lexpr, parse_uexpr
from ulang.pretty import pretty
from ulang.testkit import FIRST_ORDER, gen_program


def test_u_lambda():
    e = parse_uexpr("fun (x : unit) -> x")
    assert isinstance(e, ULam) and isinstance(e.ty, UUnitT)


def test_box_sugar():
    assert parse_lexpr("(x, xs)@l") == LBoxE(LPair(LVar("l"), LPair(LVar("x"), LVar("xs"))))


def test_boundary_nesting():
    e = parse_uexpr("UL { share (LU { () } ) }")
    assert isinstance(e, UL) and not e.store
    assert isinstance(e.body, LShare) and not e.body.store
    assert isinstance(e.body.body, LU) and isinstance(e.body.body.body, UUnitV)


def test_elaborate_inlines_definitions():
    sf = parse("def id = fun (x : unit) -> x;\nmain = id ();")
    e = elaborate(sf)
    assert pretty(e) == "(fun (x : unit) -> x) ()"


def test_comments_are_ignored():
    sf = parse("-- a comment\nmain = (); -- trailing\n")
    assert isinstance(sf.main, UUnitV)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse("main = fun (x unit) -> x;")
    assert info.value.line == 1
    assert "expected" in info.value.message


def test_missing_main():
    with pytest.raises(UnboundName):
        elaborate(parse("def id = fun (x : unit) -> x;"))


def test_dollar_names_survive_round_trip():
    e = parse_uexpr("fun (p$1 : unit) -> p$1")
    assert alpha_eq(parse_uexpr(pretty(e)), e)


@pytest.mark.parametrize("prog", programs(), ids=lambda p: p.name)
def test_corpus_render_round_trip(prog):
    sf = parse(prog.source)
    again = parse(sf.render())
    assert again.render() == sf.render()
    assert alpha_eq(elaborate(again), elaborate(sf))


def test_fix_elaborates_to_working_recursion(corpus_dir):
    from ulang.corpus import decode, encode, main_type
    from ulang.ast import UApp, UVar

    sf = parse((corpus_dir / "rev.ul").read_text())
    ty = main_type(sf)
    arg = encode([7, 8], ty)
    result = run(elaborate(sf, UApp(UVar("rev"), arg)))
    assert decode(result.value, ty) == [8, 7]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), ty=st.sampled_from(FIRST_ORDER), size=st.integers(0, 8))
def test_pretty_parse_round_trip_on_generated_programs(seed, ty, size):
    e = gen_program(ty, size, seed)
    assert alpha_eq(parse_uexpr(pretty(e)), e)
