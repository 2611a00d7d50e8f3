import pytest

from ulang.ast import (
    EMPTY_CTX, EMPTY_STORE, Alive, Configuration, Dead, MixedContext, StoreTyping, ltype_eq,
)
from ulang.errors import (
    BranchUsageMismatch, CopyOfNonBang, LinearVariableReused, LinearVariableUnused,
    LocationReused, NotTypable, ShareCapturesLinear, SharedLinearVariable,
)
from ulang.eval import Machine
from ulang.parser import parse, parse_config, parse_lexpr, parse_ltype
from ulang.typecheck_l import (
    check_closed_l, ctxjoin, infer_store_typing, typecheck_l_internal, typecheck_l_surface,
)


def lt(src):
    return parse_ltype(src)


def surface(src, ctx=EMPTY_CTX):
    return typecheck_l_surface(ctx, parse_lexpr(src))


class TestCtxJoin:
    def test_empty(self):
        assert ctxjoin(EMPTY_CTX, EMPTY_CTX).entries == ()

    def test_duplicable_entries_merge(self):
        a = EMPTY_CTX.add_l("x", lt("!1"))
        assert ctxjoin(a, a).lookup("x").ty == lt("!1")

    def test_linear_entries_clash(self):
        a = EMPTY_CTX.add_l("x", lt("1 -o 1"))
        with pytest.raises(SharedLinearVariable):
            ctxjoin(a, a)


def test_swap_type_and_usage(corpus_dir):
    from ulang.parser import elaborate_definitions

    sf = parse((corpus_dir / "swap.ul").read_text())
    swap = next(d for d in elaborate_definitions(sf) if d.name == "swap")
    ctx = EMPTY_CTX.add_ltyvar("t")
    ty, usage = typecheck_l_surface(ctx, swap.body)
    assert ltype_eq(ty, lt("Box t * t -o Box t * t"))
    assert usage.consumed_vars == frozenset()
    # the body alone consumes exactly p
    ty, usage = typecheck_l_surface(ctx.add_l("p", lt("Box t * t")), swap.body.body)
    assert usage.consumed_vars == {"p"}


def test_rev_into_type(corpus_dir):
    from ulang.parser import elaborate_definitions

    sf = parse((corpus_dir / "rev.ul").read_text())
    rev_into = next(d for d in elaborate_definitions(sf) if d.name == "rev_into")
    ty, _ = typecheck_l_surface(EMPTY_CTX.add_ltyvar("a"), rev_into.body)
    ll = "(mu l. 1 + Box (a * l))"
    assert ltype_eq(ty, lt(f"{ll} -o {ll} -o {ll}"))


def test_linear_reuse_rejected():
    with pytest.raises(LinearVariableReused):
        surface("fun (x : 1) -o (x, x)")


def test_linear_unused_rejected():
    with pytest.raises(LinearVariableUnused):
        surface("fun (x : Box0) -o ()")


def test_share_of_closed_function():
    ty, usage = surface("share (fun (x : 1) -o x)")
    assert ltype_eq(ty, lt("!(1 -o 1)")) and usage.consumed_vars == frozenset()


def test_share_cannot_capture_linear():
    ctx = EMPTY_CTX.add_l("h", lt("Box0"))
    with pytest.raises(ShareCapturesLinear):
        surface("share h", ctx)


def test_copy_needs_bang():
    with pytest.raises(CopyOfNonBang):
        surface("copy ()")


def test_case_branches_must_agree():
    ctx = EMPTY_CTX.add_l("h", lt("Box0"))
    with pytest.raises(BranchUsageMismatch):
        surface("case inl[1 + 1] () of { inl a -> let () = a in free h | inr b -> b }", ctx)


def test_closed_check_demands_all_linear_vars():
    ctx = EMPTY_CTX.add_l("h", lt("Box0"))
    with pytest.raises(LinearVariableUnused):
        check_closed_l(ctx, parse_lexpr("()"))


def test_dead_location_is_box0():
    c = parse_config("with {#1 := empty} #1")
    ty, usage = typecheck_l_internal(StoreTyping({1: Dead()}), EMPTY_CTX, c.store, c.expr)
    assert ltype_eq(ty, lt("Box0")) and usage.consumed_locs == {1}


def test_alive_location_holds_value():
    c = parse_config("with {#1 := {} ()} #1")
    ty, _ = typecheck_l_internal(None, EMPTY_CTX, c.store, c.expr)
    assert ltype_eq(ty, lt("Box 1"))


def test_share_closes_over_its_store():
    c = parse_config("share with {#1 := empty} (fun (x : 1) -o let () = x in free #1)")
    ty, usage = typecheck_l_internal(None, EMPTY_CTX, c.store, c.expr)
    assert ltype_eq(ty, lt("!(1 -o 1)"))
    assert usage.consumed_locs == frozenset()


def test_location_used_twice_rejected():
    c = parse_config("with {#1 := empty} (#1, #1)")
    with pytest.raises(LocationReused):
        typecheck_l_internal(None, EMPTY_CTX, c.store, c.expr)


def test_infer_store_typing_empty():
    assert infer_store_typing(EMPTY_STORE, parse_lexpr("()")) == StoreTyping({})


def test_infer_after_new_and_box():
    m = Machine()
    c = Configuration(EMPTY_STORE, parse_lexpr("box (new (), share ())"))
    c = m.step(c).state
    assert infer_store_typing(c.store, c.expr) == StoreTyping({next(iter(c.store.domain())): Dead()})
    c = m.step(c).state
    (loc,) = c.store.domain()
    assert infer_store_typing(c.store, c.expr) == StoreTyping(
        {loc: Alive(MixedContext(), StoreTyping({}), lt("!1"))})


def test_infer_rejects_wrong_type():
    with pytest.raises(NotTypable):
        infer_store_typing(EMPTY_STORE, parse_lexpr("()"), lt("Box0"))
