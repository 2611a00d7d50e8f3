import json

import pytest
from hypothesis import given, settings, strategies as st

from ulang.ast import UApp, UVar, alpha_eq
from ulang.corpus import (
    check_program, corpus_suite, decode, diagnose, encode, find, main_type, programs,
)
from ulang.errors import LinearVariableUnused
from ulang.eval import run
from ulang.parser import elaborate, parse


def test_suite_is_green():
    rep = corpus_suite()
    assert rep.ok, "\n".join(rep.lines())


@pytest.mark.parametrize("prog", programs(), ids=lambda p: p.name)
def test_every_program_has_a_sidecar(prog):
    assert prog.expected, f"{prog.name} has no expected-output sidecar"
    assert check_program(prog).ok


def insertion_sort(xs):
    out = []
    for x in xs:
        i = 0
        while i < len(out) and out[i] <= x:
            i += 1
        out.insert(i, x)
    return out


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 6), max_size=6))
def test_rev_matches_reference(xs):
    sf = find("rev").parse()
    ty = main_type(sf)
    result = run(elaborate(sf, UApp(UVar("rev"), encode(xs, ty))))
    assert decode(result.value, ty) == list(reversed(xs))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 5), max_size=5))
def test_quicksort_matches_insertion_sort(xs):
    sf = find("quicksort").parse()
    ty = main_type(sf)
    result = run(elaborate(sf, UApp(UVar("quicksort"), encode(xs, ty))))
    assert decode(result.value, ty) == insertion_sort(xs)


def test_removing_close_is_a_type_error():
    text = find("file").source
    assert diagnose(text) is None
    broken = find("ill/file_noclose")
    err = diagnose(broken.source)
    assert isinstance(err, LinearVariableUnused)


def test_ill_typed_programs_match_goldens():
    ill = [p for p in programs() if p.ill_typed]
    assert len(ill) == 3
    for prog in ill:
        err = diagnose(prog.source)
        assert err is not None and err.headline() == prog.expected["error"]["headline"]


def test_mutset_keeps_sorted_unique_elements():
    prog = find("mutset")
    assert prog.expected["decoded"] == [0, 1, 3, 4, 5]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), max_size=8))
def test_encode_decode_round_trip(xs):
    ty = main_type(find("rev").parse())
    v = encode(xs, ty)
    assert decode(v, ty) == xs
    assert alpha_eq(encode(decode(v, ty), ty), v)


def test_sidecars_are_valid_json(corpus_dir):
    for path in corpus_dir.rglob("*.expected.json"):
        json.loads(path.read_text())
    assert parse(find("swap").source).main is not None
