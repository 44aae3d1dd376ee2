import csv
import io
import json
import shutil

import numpy as np
import pytest

from abip.cli import BENCH_FIELDS, BENCH_SCHEMA, EXIT_DATAERR, EXIT_USAGE, cli_main
from abip.ingest.mps import parse_mps

from conftest import netlib_path, reference_objectives

INFEASIBLE_PAIR = """\
NAME PAIR
ROWS
 N obj
 E r1
 E r2
COLUMNS
 x obj 1 r1 1
 x r2 1
 y obj 1 r1 1
 y r2 1
RHS
 rhs r1 1 r2 2
ENDATA
"""

UNBOUNDED = """\
NAME UNB
ROWS
 N obj
 E r1
 E r2
COLUMNS
 a obj -1 r1 1
 b r1 -1
 c obj 0.5 r2 1
 d obj 1 r2 1
RHS
 rhs r2 1
ENDATA
"""


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli_main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    (tmp_path / "pair.mps").write_text(INFEASIBLE_PAIR)
    (tmp_path / "unb.mps").write_text(UNBOUNDED)
    (tmp_path / "bad.mps").write_text("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x e abc\nENDATA\n")
    return tmp_path


def test_solve_afiro():
    code, out, _ = run("solve", netlib_path("AFIRO"))
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "Optimal"
    ref = reference_objectives()["AFIRO"]
    assert abs(rec["objective"] - ref) <= 1e-2 * abs(ref)
    assert rec["presolve"]["before"]["rows"] == 27
    assert max(rec["pres"], rec["dres"], rec["dgap"]) <= 1e-3


def test_solve_flags_reach_the_solver():
    code, out, _ = run("solve", netlib_path("AFIRO"), "--max-admm-steps", "10", "--no-bb", "--alpha", "1.5")
    assert code == 4 and json.loads(out)["status"] == "Unfinished"


def test_infeasible_exit_codes(files):
    code, out, _ = run("solve", files / "pair.mps")
    assert code == 2 and json.loads(out)["status"] == "PrimalInfeasible"
    code, out, err = run("solve", files / "pair.mps", "--no-presolve")
    rec = json.loads(out)
    assert code == 2 and rec["status"] == "PrimalInfeasible"
    y = np.array(rec["certificate"])
    assert y @ [1.0, 2.0] == pytest.approx(1.0)


def test_unbounded_exit_code(files):
    code, out, _ = run("solve", files / "unb.mps", "--no-presolve")
    rec = json.loads(out)
    assert code == 3 and rec["status"] == "DualInfeasible"
    assert len(rec["certificate"]) == 4


def test_usage_and_data_errors(files):
    assert run()[0] == EXIT_USAGE
    assert run("gen", "random", "--m", "4", "--n", "2")[0] == EXIT_USAGE
    assert run("solve", files / "pair.mps", "--linsys", "lu")[0] == EXIT_USAGE
    assert run("solve", files / "pair.mps", "--gamma-min", "0.95")[0] == EXIT_USAGE
    code, _, err = run("solve", files / "bad.mps")
    assert code == EXIT_DATAERR and "line 6" in err
    assert run("solve", files / "missing.mps")[0] == EXIT_DATAERR


def test_config_file(files):
    cfg = files / "cfg.json"
    cfg.write_text(json.dumps({"max_admm_steps": 5}))
    code, out, _ = run("solve", netlib_path("AFIRO"), "--config", cfg)
    assert code == 4
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run("solve", netlib_path("AFIRO"), "--config", cfg)[0] == EXIT_USAGE


def test_gen_random_is_deterministic(tmp_path):
    a = run("gen", "random", "--m", "5", "--n", "12", "--seed", "3")[1]
    b = run("gen", "random", "--m", "5", "--n", "12", "--seed", "3")[1]
    assert a == b
    assert a != run("gen", "random", "--m", "5", "--n", "12", "--seed", "4")[1]
    lp = parse_mps(a)
    assert lp.shape == (5, 12)
    out = tmp_path / "r.mps"
    assert run("gen", "random", "--m", "5", "--n", "12", "--seed", "3", "-o", out)[0] == 0
    side = json.loads((tmp_path / "r.json").read_text())
    x = np.array(side["x"])
    np.testing.assert_allclose(lp.A @ x, lp.b, atol=1e-9)
    assert side["objective"] == pytest.approx(lp.c @ x)


def test_gen_sice(tmp_path):
    cov = tmp_path / "cov.csv"
    np.savetxt(cov, np.array([[1.0, 0.2], [0.2, 1.0]]), delimiter=",")
    code, text, _ = run("gen", "sice", "--cov", cov, "--col", "2", "--samples", "50")
    assert code == 0
    assert parse_mps(text).shape == (4, 8)
    assert run("gen", "sice", "--cov", cov, "--col", "3", "--samples", "50")[0] == EXIT_DATAERR
    assert run("gen", "sice", "--cov", tmp_path / "none.csv", "--col", "1", "--samples", "50")[0] == EXIT_DATAERR


def test_presolve_report():
    code, out, _ = run("presolve-report", netlib_path("ADLITTLE"))
    rep = json.loads(out)
    assert code == 0
    assert rep["before"] == {"rows": 56, "cols": 138, "nonzeros": 424, "sparsity": 424 / (56 * 138)}
    assert (rep["after_reductions"]["rows"], rep["after_reductions"]["cols"]) == (55, 137)
    code, out2, _ = run("solve", netlib_path("ADLITTLE"), "--presolve-report")
    assert json.loads(out2) == rep


@pytest.mark.parametrize("threads", [1, 2])
def test_bench_json_and_csv(tmp_path, threads):
    for name in ("AFIRO", "SC50A"):
        shutil.copy(netlib_path(name), tmp_path)
    code, out, _ = run("bench", tmp_path, "--threads", threads)
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == BENCH_SCHEMA
    assert doc["fields"] == list(BENCH_FIELDS)
    assert [r["instance"] for r in doc["records"]] == ["AFIRO", "SC50A"]
    assert all(set(r) == set(BENCH_FIELDS) for r in doc["records"])
    code, out, _ = run("bench", tmp_path, "--csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == BENCH_FIELDS and len(rows) == 3


def test_log_level(monkeypatch):
    monkeypatch.setenv("ABIP_LOG", "info")
    code, _, err = run("solve", netlib_path("AFIRO"))
    assert code == 0 and "k=0 mu=" in err
    monkeypatch.setenv("ABIP_LOG", "error")
    assert "k=0" not in run("solve", netlib_path("AFIRO"))[2]
