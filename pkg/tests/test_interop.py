import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ulang.ast import U_UNITV, alpha_eq, utype_eq
from ulang.errors import NotInImage, ShapeMismatch
from ulang.interop import all_compatible, compat, distinct_types, l_to_u, recover_u, u_to_l
from ulang.parser import parse_lexpr, parse_ltype, parse_uexpr, parse_utype
from ulang.pretty import pretty
from ulang.testkit import FIRST_ORDER, U_TYPES, random_compat, random_first_order, random_u_value


def lt(s):
    return parse_ltype(s)


def ut(s):
    return parse_utype(s)


@pytest.mark.parametrize("tau, t, ok", [
    ("unit", "!1", True),
    ("unit", "!!1", True),
    ("unit * unit", "!(!1 * !1)", True),
    ("unit", "!(1 -o 1)", False),
    ("unit", "1", False),
    ("unit -> unit", "!(!1 -o !1)", True),
    ("unit -> unit", "!(1 -o 1)", False),
    ("unit", "!Box 1", True),
    ("mu n. unit + n", "!(mu a. 1 + Box a)", True),
    # iso-recursive: one unrolling of Nat is a different type from Nat
    ("mu n. unit + n", "!(mu a. 1 + Lump(mu n. unit + n))", False),
    ("mu a. unit + (mu n. unit + n)", "!(mu a. 1 + Lump(mu n. unit + n))", True),
])
def test_compat_examples(tau, t, ok):
    assert compat((), ut(tau), lt(t)) is ok


@pytest.mark.parametrize("tau", U_TYPES, ids=pretty)
def test_every_type_is_compatible_with_its_lump(tau):
    from ulang.ast import LBang, LLumpT

    assert compat((), tau, LBang(LLumpT(tau)))


def test_recover_examples():
    assert utype_eq(recover_u(lt("!Lump(unit)")), ut("unit"))
    assert utype_eq(recover_u(lt("!(!1 * !Lump(unit))")), ut("unit * unit"))
    with pytest.raises(NotInImage):
        recover_u(lt("1"))


def test_lump_payload_is_not_captured_by_l_binder():
    from ulang.ast import utype_ftv

    # the a inside Lump(...) is a U variable; the L binder a cannot capture it
    tau = recover_u(lt("!(mu a. 1 + Lump(a))"))
    assert utype_ftv(tau) == {"a"}
    assert tau.var != "a"


def test_brute_force_agrees_with_recover():
    t = lt("!(mu a. 1 + Box (!Lump(unit) * a))")
    found = distinct_types(all_compatible(t))
    assert len(found) == 1 and utype_eq(found[0], recover_u(t))


def test_u_to_l_examples():
    assert pretty(u_to_l(U_UNITV, lt("!1"))) == "share ()"
    assert pretty(u_to_l(U_UNITV, lt("!Lump(unit)"))) == "share [| () |]"
    v = parse_uexpr("inl[unit + unit] ()")
    assert pretty(u_to_l(v, lt("!(!1 + !1)"))) == "share (inl[!1 + !1] (share ()))"


def test_l_to_u_examples():
    assert l_to_u(parse_lexpr("share ()"), lt("!1")) == U_UNITV
    w = parse_lexpr("share with {#1 := {} share ()} #1")
    assert l_to_u(w, lt("!(Box !1)")) == U_UNITV


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        l_to_u(parse_lexpr("share (inl[1 + 1] ())"), lt("!1"))


def test_box_conversion_allocates_cells():
    v = parse_uexpr("((), ())")
    w = u_to_l(v, lt("!(Box 1 * Box 1)"), itertools.count(10).__next__)
    assert w.store.domain() == {10, 11}


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_round_trip_on_random_first_order_values(seed):
    import random

    rng = random.Random(seed)
    tau = random_first_order(rng)
    t = random_compat(rng, tau)
    from ulang.ast import LBang

    t = LBang(t)
    assert utype_eq(recover_u(t), tau)
    v = random_u_value(rng, tau, rng.randint(0, 6))
    assert alpha_eq(l_to_u(u_to_l(v, t), t), v)


@pytest.mark.parametrize("tau", FIRST_ORDER, ids=pretty)
def test_round_trip_through_lump(tau):
    from ulang.ast import LBang, LLumpT
    import random

    v = random_u_value(random.Random(0), tau, 4)
    t = LBang(LLumpT(tau))
    assert alpha_eq(l_to_u(u_to_l(v, t), t), v)
