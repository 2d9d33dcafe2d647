import csv
import io
import json
import subprocess
import sys

import pytest

from corrbound.cli import EXIT_CAP, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_PREMISE, config_to_argv, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_selftest_quick(capsys):
    code, out, _ = run(capsys, "selftest", "--quick")
    assert code == EXIT_OK
    assert json.loads(out)["passed"] is True


def test_dist_match_cluster(capsys):
    code, out, _ = run(capsys, "dist", "--x", "[[0,0],[2,0]]", "--y", "[[1,0],[3,0]]")
    assert code == EXIT_OK and json.loads(out) == {"D_H": 1.0, "D_m": 1.0, "D_s": 2.0, "metric": "euclidean"}
    code, out, _ = run(capsys, "dist", "--x", "[[0],[1],[10],[11]]")
    assert json.loads(out)["D_s_X"] == 2.0
    code, out, _ = run(capsys, "match", "--x", "[[0],[5]]", "--y", "[[1],[100]]")
    assert json.loads(out) == {"perm": [0, 1], "sum": 96.0, "max": 95.0, "multiplicity": 1}
    code, out, _ = run(capsys, "cluster", "--x", "[[0],[5]]", "--y", "[[1],[100]]")
    data = json.loads(out)
    assert code == EXIT_OK and data["j0"] == 1 and data["cluster"] == [0]


def test_config_file(tmp_path, capsys):
    f = tmp_path / "x.json"
    f.write_text("[[0, 0], [3, 4]]", encoding="utf-8")
    code, out, _ = run(capsys, "dist", "--x", str(f))
    assert code == EXIT_OK and json.loads(out)["D_s_X"] == 5.0


def test_bound_check_thm13_stream(capsys):
    code, out, _ = run(capsys, "bound", "check-thm13", "--n", "6", "--d", "2", "--mu", "1.0",
                       "--trials", "200", "--seed", "7")
    reports = jsonl(out)
    assert code == EXIT_OK and len(reports) == 200
    assert all(r["satisfied"] and r["theorem_id"] == "thm13" for r in reports)


@pytest.mark.parametrize("action,theorem", [("check-thm12", "thm12"), ("check-thm15", "thm15")])
def test_bound_other_checks(capsys, action, theorem):
    code, out, _ = run(capsys, "bound", action, "--n", "3", "--d", "2", "--trials", "5", "--seed", "3")
    reports = jsonl(out)
    assert code == EXIT_OK and len(reports) == 5
    assert all(r["satisfied"] and r["theorem_id"] == theorem for r in reports)


def test_bound_counting_csv(capsys):
    code, out, _ = run(capsys, "bound", "counting", "--n", "4", "--d", "2", "--trials", "3", "--seed", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK and rows and all(r["ok"] == "True" for r in rows)
    for t in "012":
        assert sum(int(r["count"]) for r in rows if r["trial"] == t) == 24


def test_anderson_commands(capsys):
    base = ["--samples", "40", "--seed", "7"]
    code, out, _ = run(capsys, "anderson", "dle", *base)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK and rows[0]["localized"] == "True" and float(rows[0]["mu_hat"]) > 0
    code, out, _ = run(capsys, "anderson", "mpdl", *base, "--config", '{"X": [[10],[20]], "Y": [[12],[25]]}')
    assert code == EXIT_OK and jsonl(out)[0]["theorem_id"] == "mpdl"
    code, out, _ = run(capsys, "anderson", "q", *base, "--family", "fermi")
    assert code == EXIT_OK and all(r["holds"] == "True" for r in csv.DictReader(io.StringIO(out)))
    code, out, _ = run(capsys, "anderson", "ule", "--samples", "2", "--W", "10", "--config",
                       '{"X": [[3]], "Y": [[5]]}')
    assert code == EXIT_OK and {"ule-det"} <= {r.get("theorem_id") for r in jsonl(out)}


def test_anderson_q_premise(capsys):
    code, _, err = run(capsys, "anderson", "q", "--W", "0", "--L", "32", "--samples", "30")
    assert code == EXIT_PREMISE and "premise" in err


def test_ising_commands(capsys):
    code, out, _ = run(capsys, "ising", "corr", "--sites", "[[0,0],[0,1]]")
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK and float(row["distance"]) == 1.0 and float(row["error"]) == 0.0
    code, out, _ = run(capsys, "ising", "decay", "--dims", "3,3", "--beta", "0.2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 8 and list(rows[0]) == ["distance", "site", "correlation", "error"]
    code, out, _ = run(capsys, "ising", "verify", "--sites", "[[0,0],[1,2],[3,1],[2,3]]")
    assert code == EXIT_OK and json.loads(out)["satisfied"]
    code, out, _ = run(capsys, "ising", "pfaffian", "--sites", "[[0,0],[0,3],[3,3],[3,0]]")
    assert code == EXIT_OK and json.loads(out)["gap"] <= 1e-10
    code, out, _ = run(capsys, "ising", "corr", "--dims", "6,6", "--method", "wolff", "--sweeps", "2000",
                       "--burn-in", "100", "--sites", "[[0,0],[0,1]]", "--seed", "2")
    assert code == EXIT_OK and float(next(csv.DictReader(io.StringIO(out)))["error"]) > 0


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"command": "dist",\n  "params": {"x": [[0]],, }}', encoding="utf-8")
    code, _, err = run(capsys, "run", str(bad))
    assert code == EXIT_CONFIG and "bad.json:2:" in err
    code, _, err = run(capsys, "dist", "--x", "[[0], [1]")
    assert code == EXIT_CONFIG and "1:" in err
    code, _, _ = run(capsys, "dist", "--x", "[[0],[0]]", "--y", "[[1],[2]]")
    assert code == EXIT_CONFIG
    code, _, _ = run(capsys, "bound", "nonsense")
    assert code == EXIT_CONFIG
    code, _, _ = run(capsys, "bound", "check-thm13", "--n", "40")
    assert code == EXIT_CAP
    code, _, _ = run(capsys, "ising", "verify", "--dims", "5,5", "--sites", "[[0,0],[1,1]]")
    assert code == EXIT_CAP
    code, _, _ = run(capsys, "anderson", "dle", "--d", "3", "--L", "20")
    assert code == EXIT_CAP


def test_run_config(tmp_path, capsys):
    out_file = tmp_path / "out.jsonl"
    cfg = {"command": "bound check-thm13", "params": {"n": 3, "trials": 4}, "seed": 7,
           "output": str(out_file), "format": "json"}
    f = tmp_path / "run.json"
    f.write_text(json.dumps(cfg), encoding="utf-8")
    code, out, _ = run(capsys, "run", str(f))
    assert code == EXIT_OK and out == ""
    assert len(jsonl(out_file.read_text(encoding="utf-8"))) == 4
    code, _, err = run(capsys, "run", json.dumps({"command": "dist", "colour": "red"}))
    assert code == EXIT_CONFIG and "colour" in err
    assert config_to_argv({"command": "selftest", "params": {"quick": True}}) == ["selftest", "--quick"]


def test_determinism_and_env_seed(capsys, monkeypatch):
    a = run(capsys, "bound", "check-thm12", "--n", "3", "--trials", "3", "--seed", "11")[1]
    b = run(capsys, "bound", "check-thm12", "--n", "3", "--trials", "3", "--seed", "11")[1]
    assert a == b
    monkeypatch.setenv("CORRBOUND_SEED", "11")
    c = run(capsys, "bound", "check-thm12", "--n", "3", "--trials", "3")[1]
    assert c == a


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "corrbound", "selftest", "--quick"], capture_output=True,
                         text=True, encoding="utf-8")
    assert res.returncode == 0 and json.loads(res.stdout)["passed"]
