import csv
import io
import json
import subprocess
import sys

import pytest

from contlogic import corpus
from contlogic.cli import main

from oracles import ii1_grid_oracle


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_bundled_files(capsys, tmp_path):
    for name in corpus.bundled_files():
        p = tmp_path / name
        p.write_text(corpus.read(name))
        code, out, _ = run(capsys, "check", str(p))
        assert code == 0, name
        assert json.loads(out)["ok"] is True


def test_check_malformed_reports_diagnostic(capsys, tmp_path):
    p = tmp_path / "malformed.thy"
    p.write_text("theory broken over cstar;\naxiom a : sup x in D[1]. ||x * ||;\n")
    code, out, err = run(capsys, "check", str(p))
    assert code == 1
    rep = json.loads(out)
    assert rep["ok"] is False and rep["diagnostics"][0]["line"] == 2
    assert "malformed.thy:2:" in err


def test_check_missing_file_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "check", str(tmp_path / "absent.thy"))
    assert code == 2 and err


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "axioms", "--suite", "tcstar")[0] == 2
    assert run(capsys, "axioms", "--suite", "tcstar", "--structure", "nonsense:3")[0] == 2
    assert run(capsys, "limits", "--sentence", "tii1:atomless", "--dims", "5..2")[0] == 2
    assert run(capsys, "eval", "--structure", "matC*:2", "--sentence", "tcstar:cstar_identity",
               "--sample-budget", "0")[0] == 2


def test_axioms_tcstar(capsys):
    code, out, _ = run(capsys, "axioms", "--suite", "tcstar", "--structure", "matC*:2")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1 and rep["verdict"] <= 1e-6
    assert rep["config"]["structure"] == "matC*:2"
    assert "sample_budget" in json.dumps(rep["config"])


def test_axioms_table_and_mismatch(capsys):
    code, out, _ = run(capsys, "axioms", "--suite", "tfactor", "--structure", "dsum:2,2",
                       "--format", "table")
    assert code == 1 and out.startswith("axiom")
    # a structure outside the suite's signature is a usage error
    code, _, err = run(capsys, "axioms", "--suite", "ttr", "--structure", "matC*:2")
    assert code == 2 and "does not interpret" in err


def test_axioms_without_hints_flags_directions(capsys):
    code, out, _ = run(capsys, "axioms", "--suite", "ttr", "--structure", "tracial:2", "--no-hints",
                       "--cap", "2")
    rep = json.loads(out)
    for row in rep["rows"]:
        if row["worst"]["value"] > 1e-6:
            assert row["worst"]["bound_direction"] in ("lowerBoundOfSup", "indeterminate")
    assert rep["config"]["quant"]["use_hints"] is False


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "--structure", "tracial:3", "--sentence", "tii1:atomless")
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["estimate"]["value"] - ii1_grid_oracle(3, mesh=5e-4)) <= 1e-3
    code, out, _ = run(capsys, "eval", "--structure", "matC*:2", "--sentence", "tcstar:cstar_identity@3")
    assert code == 0 and json.loads(out)["estimate"]["value"] <= 1e-6


def test_eval_formula_file(capsys, tmp_path):
    p = tmp_path / "phi.txt"
    p.write_text("sup a in D[1]. |tr(a)|\n")
    code, out, _ = run(capsys, "eval", "--structure", "tracial:2", "--sentence", str(p))
    rep = json.loads(out)
    assert code == 0 and rep["estimate"]["value"] == pytest.approx(1.0)
    assert rep["estimate"]["bound_direction"] == "lowerBoundOfSup"


def test_order(capsys):
    code, out, _ = run(capsys, "order", "--l1", "--max-index", "4")
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "pass" and rep["delta"] == 0.05
    code, out, _ = run(capsys, "order", "--l1", "--max-index", "2", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "i,j,value,lower,upper,required"


def test_type(capsys):
    code, out, _ = run(capsys, "type", "--spec", "relcomm", "--structure", "tracial:2")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "realized" and rep["estimate"]["value"] <= 1e-6
    code, out, _ = run(capsys, "type", "--spec", "separation", "--structure", "matC*:2")
    rep = json.loads(out)
    assert rep["estimate"]["value"] >= 1.1 and rep["status"] == "inconclusive"


def test_limits_csv_and_determinism(capsys, tmp_path):
    args = ["limits", "--sentence", "tii1:atomless", "--dims", "1..4", "--format", "csv",
            "--rng-seed", "3"]
    code, first, _ = run(capsys, *args)
    assert code == 0
    _, second, _ = run(capsys, *args)
    assert first == second
    rows = list(csv.DictReader(io.StringIO(first)))
    assert [int(r["dim"]) for r in rows] == [1, 2, 3, 4]
    out = tmp_path / "t.json"
    code, stdout, _ = run(capsys, "limits", "--sentence", "tii1:atomless", "--dims", "2,3",
                          "--format", "json", "--out", str(out))
    assert code == 0 and stdout == ""
    rep = json.loads(out.read_text())
    assert rep["config"]["quant"]["rng_seed"] == 0 and len(rep["rows"]) == 2


def test_config_file_and_flags_agree(capsys, tmp_path):
    exp = tmp_path / "run.exp"
    exp.write_text("experiment x\ncommand = limits\nsentence = tii1:atomless\ndims = 1..3\nsample_budget = 32\n")
    _, a, _ = run(capsys, "limits", "--config", str(exp))
    _, b, _ = run(capsys, "limits", "--sentence", "tii1:atomless", "--dims", "1..3",
                  "--sample-budget", "32")
    assert a == b
    # flags win over the file
    _, c, _ = run(capsys, "limits", "--config", str(exp), "--dims", "2", "--format", "json")
    assert [r["dim"] for r in json.loads(c)["rows"]] == [2]
    assert run(capsys, "axioms", "--config", str(exp), "--suite", "tcstar")[0] == 2


def test_json_reports_byte_identical(capsys):
    args = ["axioms", "--suite", "ttr", "--structure", "tracial:2", "--cap", "2", "--rng-seed", "5"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "contlogic.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "contlogic" in proc.stdout
