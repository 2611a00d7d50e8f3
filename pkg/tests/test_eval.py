import json

import pytest

from ulang.ast import EMPTY, EMPTY_STORE, Configuration, Full, LFold, LLoc, Store, U_UNITV, alpha_eq
from ulang.corpus import decode, encode, main_type
from ulang.eval import (
    ALL_RULES, Machine, OutOfFuel, Stuck, Value, run, step_l, trace_lines, write_trace,
)
from ulang.parser import elaborate, parse, parse_config, parse_lexpr, parse_uexpr
from ulang.pretty import pretty


def steps_of(config, n):
    m = Machine()
    for _ in range(n):
        config = m.step(config).state
    return config, m


def test_new_allocates_an_empty_cell():
    c, m = steps_of(Configuration(EMPTY_STORE, parse_lexpr("new ()")), 1)
    (loc,) = c.store.domain()
    assert c.expr == LLoc(loc) and c.store.get(loc) == EMPTY
    assert m.stats.new_allocs == 1


def test_box_fills_the_cell():
    c = step_l(parse_config("with {#1 := empty} box (#1, share ())"))
    assert c.expr == LLoc(1)
    slot = c.store.get(1)
    assert isinstance(slot, Full) and pretty(slot.value) == "share ()" and not slot.local


def test_copy_of_shared_fold_pushes_copy_inward():
    c = step_l(parse_config("copy (share (fold[mu a. 1 + a] (inl[1 + (mu a. 1 + a)] ())))"))
    assert isinstance(c.expr, LFold)
    assert pretty(c.expr.body) == "copy (share (inl[1 + (mu a. 1 + a)] ()))"


def test_free_empties_the_store():
    c = step_l(parse_config("with {#1 := empty} free #1"))
    assert not c.store and pretty(c.expr) == "()"


@pytest.mark.parametrize("src", ["UL { LU { () } }", "(fun (x : unit) -> x) ()",
                                 "UL { lump[!Lump(unit)] (LU { () }) }"])
def test_u_programs_evaluate_to_unit(src):
    assert run(parse_uexpr(src)).value == U_UNITV


def test_unlump_converts_to_share():
    m = Machine()
    c = Configuration(EMPTY_STORE, parse_lexpr("unlump[!1] (LU { () })"))
    while not c.expr.is_value:
        c = m.step(c).state
    assert pretty(c.expr) == "share ()"


SWAP_CALL = """
ldef swap [t] = fun (p : Box t * t) -o
  let (b, x) = p in let (l, y) = unbox b in (box (l, x), y);
main = UL { lump[!!Lump(unit)] (share (
  let (b, x) = swap[!1] (box (new (), share ()), share ()) in
  let (l, y) = unbox b in let () = free l in
  let () = copy x in let () = copy y in LU { () })) };
"""


def test_swap_golden_step_count():
    trace = []
    result = run(elaborate(parse(SWAP_CALL)), trace=trace)
    assert result.value == U_UNITV
    rules = [r["rule"] for r in trace]
    # allocating the argument and running swap to its result pair
    assert rules.index("l-let-pair", rules.index("l-box", 2)) + 1 == 8
    assert result.steps == 19


def test_quicksort_matches_reference_sort(corpus_dir):
    from ulang.ast import UApp, UVar

    sf = parse((corpus_dir / "quicksort.ul").read_text())
    ty = main_type(sf)
    for data in ([3, 1, 2], [5, 0, 4, 4, 1], [], [2]):
        result = run(elaborate(sf, UApp(UVar("quicksort"), encode(data, ty))))
        assert decode(result.value, ty) == sorted(data)


def test_omega_runs_out_of_fuel(corpus_dir):
    result = run(elaborate(parse((corpus_dir / "omega.ul").read_text())), fuel=2000)
    assert isinstance(result.outcome, OutOfFuel) and result.steps == 2000


def test_rev_is_in_place(corpus_dir):
    result = run(elaborate(parse((corpus_dir / "rev.ul").read_text())))
    ty = main_type(parse((corpus_dir / "rev.ul").read_text()))
    assert decode(result.value, ty) == [4, 3, 2, 1, 0]
    assert result.stats.phases["rev_into"]["new_allocs"] == 0
    assert "new_allocs(rev_into)=0" in result.stats.as_lines()


def test_ill_typed_term_gets_stuck():
    result = run(parse_uexpr("fst ()"))
    assert isinstance(result.outcome, Stuck)


def test_one_rule_per_step_and_trace_format(tmp_path, corpus_dir):
    trace = []
    result = run(elaborate(parse((corpus_dir / "swap.ul").read_text())), trace=trace)
    assert isinstance(result.outcome, Value)
    assert len(trace) == result.steps == result.stats.steps
    assert all(r["rule"] in ALL_RULES for r in trace)
    lines = trace_lines(trace)
    assert lines[0].startswith("step 1: ") and " @ " in lines[0]
    path = tmp_path / "trace.jsonl"
    write_trace(trace, str(path))
    records = [json.loads(x) for x in path.read_text().splitlines()]
    assert {"step", "rule", "store_size", "allocs"} <= set(records[0])


def test_fold_noncancel_mutant_changes_behavior():
    e = parse_uexpr("unfold (fold[mu a. unit + a] (inl[unit + (mu a. unit + a)] ()))")
    good = run(e)
    bad = run(e, mutants=("fold_noncancel",))
    assert not (bad.terminated and alpha_eq(bad.value, good.value))


def test_store_with_full_cell_unboxes():
    store = Store({1: Full(parse_lexpr("share ()"), EMPTY_STORE)})
    c = step_l(Configuration(store, parse_lexpr("unbox #1")))
    assert pretty(c.expr) == "(#1, share ())" and c.store.get(1) == EMPTY
