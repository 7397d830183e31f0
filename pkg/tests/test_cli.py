import json
import subprocess
import sys

import pytest

from maxent_demand.cli import main
from maxent_demand.io import example_corpus_path, ingest_csv

PLANS = "fee,quota,price,cycle_days\n0,600,0.55,30\n3,800,0.55,30\n-2,400,0.55,30\n"


def run(*args):
    return main([str(a) for a in args])


def read(path):
    return path.read_bytes()


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("simulate", "--months", 2, "--seed", 7, "--out", a) == 0
    assert run("simulate", "--months", 2, "--seed", 7, "--out", b) == 0
    assert read(a) == read(b)
    assert len(ingest_csv(a, price=0.55)) == 2
    c = tmp_path / "c.csv"
    run("simulate", "--months", 2, "--seed", 8, "--out", c)
    assert read(a) != read(c)


def test_simulate_users_and_plan(tmp_path):
    out = tmp_path / "s.csv"
    assert run("simulate", "--months", 2, "--users", 3, "--plan", "0,50,inf,5",
               "--seed", 1, "--out", out) == 0
    paths = ingest_csv(out, price=float("inf"))
    assert len(paths) == 6 and all(len(p) == 5 for p in paths)


def test_fit_example_corpus(tmp_path):
    out = tmp_path / "fit.json"
    assert run("fit", example_corpus_path(), "--out", out) == 0
    doc = json.loads(out.read_text())
    assert set(doc["parameters"]) == {"mu", "beta", "gamma", "eta", "kappa"}
    assert doc["converged"] is True and doc["grad_norm"] <= 1e-8
    assert doc["iterations"] > 0


def test_fit_not_converged_exit_code(tmp_path):
    assert run("fit", example_corpus_path(), "--max-iter", 1, "--out", tmp_path / "f.json") == 2


def test_data_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("user_id,cycle_id,day,a,q,d\n0,0,0,1,5,2\n0,0,1,1,9,1\n")
    assert run("fit", bad) == 1
    assert "line 3" in capsys.readouterr().err
    assert run("fit", tmp_path / "missing.csv") == 1
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--months", 2)
    assert exc.value.code == 1


@pytest.mark.filterwarnings("ignore:skipping alternative")
@pytest.mark.parametrize("cmd", ["evaluate-plans", "bound-eta"])
def test_plan_commands_deterministic(tmp_path, cmd):
    plans = tmp_path / "plans.csv"
    plans.write_text(PLANS)
    outs = []
    for name in ("x", "y"):
        out = tmp_path / f"{name}.out"
        if cmd == "evaluate-plans":
            args = ["--plans", plans]
        else:
            args = ["--chosen", "0,600,0.55,30", "--alternatives", plans]
        assert run(cmd, *args, "--paths", 300, "--seed", 5, "--out", out) == 0
        outs.append(read(out))
    assert outs[0] == outs[1]


def test_evaluate_plans_output(tmp_path):
    plans = tmp_path / "plans.csv"
    plans.write_text(PLANS)
    out = tmp_path / "rank.csv"
    run("evaluate-plans", "--plans", plans, "--paths", 300, "--seed", 5, "--out", out)
    rows = out.read_text().splitlines()
    assert rows[0].startswith("rank,fee,quota,price,cycle_days,total_utility")
    values = [float(r.split(",")[5]) for r in rows[1:]]
    assert values == sorted(values, reverse=True)


def test_bound_eta_report(tmp_path):
    plans = tmp_path / "plans.csv"
    plans.write_text(PLANS)
    out = tmp_path / "b.json"
    with pytest.warns(UserWarning, match="same fee"):
        run("bound-eta", "--chosen", "0,600,0.55,30", "--alternatives", plans,
            "--paths", 300, "--seed", 5, "--out", out)
    doc = json.loads(out.read_text())
    kinds = sorted(r["kind"] for r in doc["alternatives"])
    assert kinds == ["lower", "upper"]
    assert doc["eta_lower_bound"] == next(r["bound"] for r in doc["alternatives"] if r["kind"] == "lower")


def test_experiment_independent_of_workers(tmp_path):
    outs = []
    for w in (1, 2):
        s, h = tmp_path / f"s{w}.csv", tmp_path / f"h{w}.csv"
        assert run("experiment", "--seed", 3, "--months-list", "4,8", "--repeats", 3,
                   "--workers", w, "--stats-out", s, "--hist-out", h) == 0
        outs.append((read(s), read(h)))
    assert outs[0] == outs[1]
    assert outs[0][0].startswith(b"param,n_months,mean,std,bias,n_converged\n")


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "maxent_demand", "simulate", "--months", "1", "--seed", "7"],
        capture_output=True, check=True,
    )
    assert out.stdout.startswith(b"user_id,cycle_id,day,a,q,d\n")
