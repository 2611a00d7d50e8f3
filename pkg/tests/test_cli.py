import json
import subprocess
import sys

import pytest

from ulang.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main


def test_check_swap(corpus_dir, capsys):
    assert main(["check", str(corpus_dir / "swap.ul")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "swap : Box t * t -o Box t * t" in out


def test_check_reports_reuse(corpus_dir, capsys):
    assert main(["check", str(corpus_dir / "ill" / "reuse.ul")]) == EXIT_FAILURE
    lines = capsys.readouterr().out.splitlines()
    assert "E011 LinearVariableReused" in lines[0]
    assert lines[1].startswith("  ")


def test_check_never_evaluates(corpus_dir, capsys):
    # omega diverges, but checking it is instant
    assert main(["check", str(corpus_dir / "omega.ul")]) == EXIT_OK


def test_run_rev_stats(corpus_dir, capsys):
    assert main(["run", str(corpus_dir / "rev.ul"), "--stats"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert "decoded: [4, 3, 2, 1, 0]" in out
    assert "new_allocs(rev_into)=0" in out
    assert all("=" in line for line in out[out.index("decoded: [4, 3, 2, 1, 0]") + 1:])


def test_run_refuses_ill_typed(corpus_dir, capsys):
    assert main(["run", str(corpus_dir / "ill" / "share_linear.ul")]) == EXIT_FAILURE
    assert "E013" in capsys.readouterr().out


def test_run_out_of_fuel(corpus_dir, capsys):
    assert main(["run", str(corpus_dir / "omega.ul"), "--fuel", "500"]) == EXIT_FAILURE
    assert "out of fuel after 500 steps" in capsys.readouterr().out


def test_run_trace(corpus_dir, tmp_path, capsys):
    path = tmp_path / "t.jsonl"
    assert main(["run", str(corpus_dir / "swap.ul"), "--trace", str(path)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("step 1: ") and " @ " in out[0]
    records = [json.loads(x) for x in path.read_text().splitlines()]
    assert len(records) == 17


def test_translate_output_rechecks(corpus_dir, tmp_path, capsys):
    assert main(["translate", str(corpus_dir / "swap.ul")]) == EXIT_OK
    translated = tmp_path / "swap_t.ul"
    translated.write_text(capsys.readouterr().out)
    assert main(["check", str(translated)]) == EXIT_OK
    assert "main : (mu n. unit + n) * (mu n. unit + n)" in capsys.readouterr().out
    assert main(["run", str(translated)]) == EXIT_OK
    assert "decoded: [2, 1]" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["run", "x.ul", "--fuel", "0"],
                                  ["check", "/no/such/file.ul"], ["meta", "--props", "nope"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    captured = capsys.readouterr()
    assert captured.err.startswith("ulang: ") and captured.out == ""


def test_meta_summary(tmp_path, capsys):
    path = tmp_path / "summary.json"
    code = main(["meta", "--samples", "20", "--seed", "3", "--props", "sr,conversion",
                 "--summary", str(path)])
    assert code == EXIT_OK
    data = json.loads(path.read_text())
    assert [d["property"] for d in data] == ["subject_reduction", "conversion"]
    assert set(data[0]) == {"property", "samples", "failures", "seed", "runtime_ms"}


def test_meta_violation_exit_code(monkeypatch, capsys):
    import ulang.testkit as tk

    def fake(props, samples, seed, workers=1):
        return [tk.Report("subject_reduction", seed, samples=1, failures=1)]

    monkeypatch.setattr(tk, "run_properties", fake)
    assert main(["meta"]) == EXIT_VIOLATION
    assert "FAIL" in capsys.readouterr().out


def test_color_switch(corpus_dir, monkeypatch, capsys):
    monkeypatch.setenv("UL_COLOR", "1")
    main(["check", str(corpus_dir / "ill" / "reuse.ul")])
    assert "\x1b[" in capsys.readouterr().out
    monkeypatch.setenv("UL_COLOR", "0")
    main(["check", str(corpus_dir / "ill" / "reuse.ul")])
    assert "\x1b[" not in capsys.readouterr().out


def test_module_entry_point(corpus_dir):
    proc = subprocess.run([sys.executable, "-m", "ulang", "check", str(corpus_dir / "swap.ul")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "swap : " in proc.stdout
