from __future__ import annotations

import io
import re

import pytest

from multilcc.cli import example1_spec, emit_experiment, main, parse_experiment, run_and_report
from multilcc.funcspec import ParseError, ValidationError

EXAMPLE1 = """\
# three requests over A, B, C
q = 97
n = 2
T = 1
d = 14
A = 1
matrices = A B C
group = x^2 : [A] [B]
group = x*y + y*z^2 : [A, B, C]
schemes = 1,2,3,4
"""


def test_parse_example1():
    spec = parse_experiment(EXAMPLE1)
    task = spec.task()
    assert task.L == 2 and task.ell == 3
    assert task.degrees == [2, 3] and task.arities == [1, 3]
    assert spec.runs() == [("1", "none"), ("2", "none"), ("3", "none"), ("4", "none")]


def test_dataset_is_seeded():
    a = parse_experiment(EXAMPLE1).task().dataset
    b = parse_experiment(EXAMPLE1).task().dataset
    c = parse_experiment(EXAMPLE1 + "seed = 1\n").task().dataset
    assert [x.tolist() for x in a] == [x.tolist() for x in b]
    assert [x.tolist() for x in a] != [x.tolist() for x in c]


def test_constant_monomial_rejected():
    with pytest.raises(ValidationError):
        parse_experiment(EXAMPLE1.replace("x^2 :", "x^0 :"))


def test_missing_t_rejected():
    with pytest.raises(ValidationError, match="'T'"):
        parse_experiment(EXAMPLE1.replace("T = 1\n", ""))


@pytest.mark.parametrize("bad,line,col", [
    ("q = 97\nbogus line\n", 2, 1),
    ("q = abc\n", 1, 5),
    ("colour = red\n", 1, 1),
    ("group = x^2 [A]\n", 1, 9),
    ("group = x + : [A]\n", 1, 13),
])
def test_parse_errors_have_positions(bad, line, col):
    with pytest.raises(ParseError) as info:
        parse_experiment(bad)
    assert (info.value.line, info.value.col) == (line, col)


@pytest.mark.parametrize("edit", [
    ("q = 97", "q = 91"),
    ("[A, B, C]", "[A, B]"),
    ("[A, B, C]", "[A, B, D]"),
    ("d = 14", "d = 140"),
    ("schemes = 1,2,3,4", "schemes = 1,5"),
])
def test_validation_errors(edit):
    with pytest.raises(ValidationError):
        parse_experiment(EXAMPLE1.replace(*edit))


def test_explicit_matrices_and_roundtrip():
    text = EXAMPLE1.replace("matrices = A B C\n", "matrices = A B\nmatrix.C = 1 2; 3 4\n") + "verify = 4A\ntrials = 3\n"
    spec = parse_experiment(text)
    assert spec.task().dataset[2].tolist() == [[1, 2], [3, 4]]
    again = parse_experiment(emit_experiment(spec))
    assert again == spec
    assert parse_experiment(emit_experiment(example1_spec())) == example1_spec()


def test_overrides_win():
    spec = parse_experiment(EXAMPLE1, {"d": 16, "q": None})
    assert spec.d == 16 and spec.q == 97


def numbers(text):
    return re.findall(r"\d+(?:\.\d+)?", text)


def test_table_and_tsv_agree():
    spec = parse_experiment(EXAMPLE1 + "schemes = 1,2,3,4,4A,4B\n")
    table, tsv = io.StringIO(), io.StringIO()
    code_t, rows_t = run_and_report(spec, table)
    from dataclasses import replace

    code_s, rows_s = run_and_report(replace(spec, format="tsv"), tsv)
    assert code_t == code_s == 0
    assert rows_t == rows_s
    body_table = [numbers(line) for line in table.getvalue().splitlines()[2:]]
    body_tsv = [numbers(line) for line in tsv.getvalue().splitlines()[1:]]
    assert body_table == body_tsv
    header = tsv.getvalue().splitlines()[0].split("\t")
    assert header[:16] == ["scheme", "verify", "d", "A", "T", "S", "SR_formula", "SR_measured", "UC", "DC", "MN_dot",
                           "WN_dot", "WN_matmul", "matmul_dim", "accept_rate", "correct_rate"]


def test_main_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "ex.cfg"
    cfg.write_text(EXAMPLE1)
    assert main(["--config", str(cfg), "--format", "tsv"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].split("\t")[:10] == ["1", "none", "14", "1", "1", "0", "2", "2", "224", "48"]
    assert main(["--config", str(cfg), "--schemes", "1", "--stragglers", "10"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("q = 97\nnonsense\n")
    assert main(["--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 2
    assert main([]) == 2
    with pytest.raises(SystemExit) as info:
        main(["--format", "xml"])
    assert info.value.code == 2


def test_main_example1_and_selftest(capsys):
    assert main(["--example1", "--n", "2", "--scheme", "4", "--verify", "4B", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert "4B" in out
    assert main(["--selftest"]) == 0
    assert "selftest: PASS" in capsys.readouterr().out


def test_false_accept_reporting():
    spec = parse_experiment(EXAMPLE1.replace("q = 97", "q = 101") + "schemes = 4A\nadversaries = 2\ntrials = 200\n")
    code, rows = run_and_report(spec, io.StringIO())
    assert code == 0
    assert rows[0]["false_accept_rate"] <= 0.1
