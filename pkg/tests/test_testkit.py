import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from ulang.ast import (
    EMPTY_CTX, EMPTY_STORE, L_BOX0, L_ONE, U_UNIT, U_UNITV, Configuration, LBox, LLoc, LPair,
    LShare, Store, EMPTY, UFun, utype_eq,
)
from ulang.eval import Machine
from ulang.parser import parse_config, parse_ltype
from ulang.testkit import (
    L_TARGETS, U_TYPES, Gen, Report, catch_mutant, check_compat_determinism,
    check_compositionality_suite, check_conversions, check_differential, check_subject_reduction,
    dischargeable, enumerate_ltypes, gen_l_config, gen_program, gen_u_term, hygiene_problems,
    random_compat, redexes, shrink_config, write_summary,
)
from ulang.typecheck_l import infer_store_typing, typecheck_l_internal
from ulang.typecheck_u import typecheck_u


def test_unit_at_size_zero_is_canonical():
    assert gen_u_term(EMPTY_CTX, U_UNIT, 0, 7) == U_UNITV


def test_function_terms_typecheck():
    ty = UFun(U_UNIT, U_UNIT)
    for seed in range(20):
        assert utype_eq(typecheck_u(EMPTY_CTX, gen_u_term(EMPTY_CTX, ty, 3, seed)), ty)


def test_twenty_u_types_all_typecheck():
    assert len(U_TYPES) == 20
    for i in range(10_000):
        ty = U_TYPES[i % 20]
        assert utype_eq(typecheck_u(EMPTY_CTX, gen_u_term(EMPTY_CTX, ty, 6, i)), ty)


def test_unit_config_at_size_zero():
    c = gen_l_config(EMPTY_CTX, L_ONE, 0, 3)
    assert not c.store and c.expr.is_value


def test_box_configs_reach_nonempty_stores():
    nonempty = sum(bool(gen_l_config(EMPTY_CTX, LBox(L_ONE), 4, s).store) for s in range(200))
    assert nonempty > 20


def test_l_configs_pass_internal_typing():
    for i in range(10_000):
        c = gen_l_config(EMPTY_CTX, L_TARGETS[i % len(L_TARGETS)], 7, i)
        typecheck_l_internal(None, EMPTY_CTX, c.store, c.expr)


def test_configs_consume_their_linear_context():
    ctx = EMPTY_CTX.add_l("h", L_BOX0).add_l("b", parse_ltype("Box 1"))
    for seed in range(200):
        c = gen_l_config(ctx, parse_ltype("1 * !1"), 6, seed)
        assert {"h", "b"} <= c.expr.fv


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_random_compat_is_compatible(seed):
    from ulang.ast import LBang
    from ulang.interop import compat, recover_u

    rng = random.Random(seed)
    tau = rng.choice(U_TYPES)
    t = LBang(random_compat(rng, tau))
    assert compat((), tau, t) and utype_eq(recover_u(t), tau)


def test_dischargeable():
    assert dischargeable(parse_ltype("mu a. 1 + Box (1 * a)"))
    assert not dischargeable(parse_ltype("Lump(unit)"))
    assert not dischargeable(parse_ltype("a"))


class TestRedexes:
    def test_value_has_none(self):
        assert redexes(parse_config("()")) == []

    def test_position_of_inner_redex(self):
        c = parse_config("(new (), new ())")
        assert redexes(c) == [("left", "l-new")]

    def test_agrees_with_machine_on_generated_states(self):
        for seed in range(300):
            c = gen_l_config(EMPTY_CTX, L_TARGETS[seed % len(L_TARGETS)], 6, seed)
            trace = []
            m = Machine(trace=trace)
            m.reserve_locations(c)
            for _ in range(30):
                if c.expr.is_value:
                    break
                predicted = redexes(c)
                assert len(predicted) == 1
                c = m.step(c).state
                assert [(r["position"], r["rule"]) for r in trace[-1:]] == predicted


class TestHygiene:
    def test_clean_state(self):
        assert hygiene_problems(parse_config("with {#1 := empty} free #1")) == []

    def test_dangling_location(self):
        assert hygiene_problems(Configuration(EMPTY_STORE, LLoc(3)))

    def test_rebinding_inside_scope(self):
        inner = LShare(Store({1: EMPTY}), LLoc(1))
        assert hygiene_problems(Configuration(Store({1: EMPTY}), LPair(LLoc(1), inner)))

    def test_sibling_copies_are_independent(self):
        shared = LShare(Store({1: EMPTY}), LLoc(1))
        assert hygiene_problems(Configuration(EMPTY_STORE, LPair(shared, shared))) == []


def test_zero_samples_give_an_empty_report():
    rep = check_subject_reduction(0)
    assert rep.samples == 0 and rep.failures == 0 and rep.ok


def test_small_subject_reduction_run_is_clean():
    rep = check_subject_reduction(200, 50, seed="unit")
    assert rep.ok, rep.text()
    assert rep.counters["location-full"] > 0


def test_runs_are_deterministic():
    a = check_subject_reduction(30, 20, seed=5)
    b = check_subject_reduction(30, 20, seed=5)
    assert a.rules == b.rules and a.counters == b.counters


def test_parallel_batches_match_sequential():
    a = check_subject_reduction(16, 20, seed=9)
    b = check_subject_reduction(16, 20, seed=9, workers=2)
    assert a.rules == b.rules and a.failures == b.failures


def test_no_freshen_mutant_is_caught():
    out = catch_mutant("no_freshen", 1000)
    assert out["caught"]


def test_shrinking_preserves_typing_and_failure():
    from ulang.testkit import _sr_trace

    mutants = ("fold_noncancel",)
    for seed in range(200):
        ty = L_TARGETS[seed % len(L_TARGETS)]
        c = gen_l_config(EMPTY_CTX, ty, 7, seed)

        def fails(cfg):
            return bool(_sr_trace(cfg, ty, 50, mutants)[0])

        if not fails(c):
            continue
        small = shrink_config(c, ty, fails)
        infer_store_typing(small.store, small.expr, ty)
        assert fails(small)
        assert len(str(small.expr)) <= len(str(c.expr))
        return
    pytest.fail("no failing configuration found for the mutant")


def test_differential_small_run():
    rep = check_differential(40, seed=2)
    assert rep.ok, rep.text()


def test_pure_u_and_divergent_programs_agree():
    from ulang.testkit import _diff_one
    from ulang.parser import parse_uexpr

    problems, direct, pure = _diff_one(parse_uexpr("(fun (x : unit) -> x) ()"), 1000)
    assert pure and not problems
    omega = parse_uexpr(
        "(fun (x : mu w. w -> unit) -> (unfold x) x) "
        "(fold[mu w. w -> unit] (fun (x : mu w. w -> unit) -> (unfold x) x))")
    problems, direct, _ = _diff_one(omega, 500)
    assert not problems and not direct.terminated


def test_generated_programs_typecheck():
    from ulang.testkit import FIRST_ORDER

    for seed in range(100):
        ty = FIRST_ORDER[seed % len(FIRST_ORDER)]
        assert utype_eq(typecheck_u(EMPTY_CTX, gen_program(ty, 8, seed)), ty)


def test_compositionality_suite():
    rep = check_compositionality_suite(30, seed=1)
    assert rep.ok and rep.samples == 30


def test_enumeration_counts():
    # size 1: the two leaves; size 2: ! and Box of each leaf, mu over three leaves
    assert sum(1 for _ in enumerate_ltypes(1)) == 2
    assert sum(1 for _ in enumerate_ltypes(2)) == 2 + 4 + 3


def test_compat_determinism_small():
    rep = check_compat_determinism(5)
    assert rep.ok and rep.counters["in_image"] > 0


def test_conversions_small():
    rep = check_conversions(100, 10, seed=3)
    assert rep.ok, rep.text()
    assert {"rule:unit", "rule:product", "rule:sum", "rule:function", "rule:lump", "rule:bang",
            "rule:box", "rule:mu", "rule:variable"} <= set(rep.counters)


def test_report_summary_file(tmp_path):
    rep = Report("demo", seed=4, samples=3, failures=1, runtime_ms=12)
    path = tmp_path / "summary.json"
    write_summary([rep], path)
    data = json.loads(path.read_text())
    assert data == [{"property": "demo", "samples": 3, "failures": 1, "seed": 4,
                     "runtime_ms": 12}]
    assert not rep.ok


def test_gen_keeps_case_branches_allocation_free():
    g = Gen(random.Random(0))
    g.push()
    with g.no_alloc():
        assert not g.can_alloc()
    assert g.can_alloc()
    g.pop()
