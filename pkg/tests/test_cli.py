import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from homlc.cli import main


@pytest.fixture
def work(tmp_path):
    (tmp_path / "body.json").write_text(json.dumps({"kind": "ball", "p": 3, "radius": 1.0}))
    (tmp_path / "fit.json").write_text(json.dumps(
        {"body_mode": "known", "body": {"kind": "ball", "p": 3, "radius": 1.0}, "center_mode": "zero"}))
    (tmp_path / "truth.json").write_text(json.dumps(
        {"family": "gauss", "body": {"kind": "ball", "p": 3, "radius": 1.0}}))
    return tmp_path


def _run(*args):
    return main([str(a) for a in args])


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_sample_fit_density_eval(work):
    assert _run("sample", "--family", "gauss", "--body", work / "body.json", "--n", 400, "--seed", 1,
                "--out", work / "x.csv") == 0
    assert len(_rows(work / "x.csv")) == 400
    assert _run("fit", "--config", work / "fit.json", "--data", work / "x.csv",
                "--out", work / "m.json") == 0
    assert _run("density", "--model", work / "m.json", "--points", work / "x.csv",
                "--out", work / "d.csv") == 0
    d = _rows(work / "d.csv")
    assert d[0] == ["log_density"] and len(d) == 401
    assert all(math.isfinite(float(r[0])) for r in d[1:])
    assert _run("eval", "--model", work / "m.json", "--truth", work / "truth.json",
                "--data", work / "x.csv", "--mc", 2000, "--out", work / "e.json") == 0
    res = json.loads((work / "e.json").read_text())
    assert math.isfinite(res["dx2"]) and 0 <= res["hell2"] <= 2 and res["out_of_support"] == 0


def test_sample_is_seeded(work):
    for name in ("a", "b"):
        _run("sample", "--family", "unif", "--body", work / "body.json", "--n", 50, "--seed", 7,
             "--out", work / f"{name}.csv")
    assert (work / "a.csv").read_bytes() == (work / "b.csv").read_bytes()
    X = np.loadtxt(work / "a.csv", delimiter=",")
    assert np.all(np.linalg.norm(X, axis=1) <= 3.0)


def test_simulate(work):
    (work / "sim.json").write_text(json.dumps(
        {"p": [2], "n": [50], "family": ["exp"], "mode": ["known"], "replicates": 2, "n_mc": 200}))
    assert _run("simulate", "--config", work / "sim.json", "--out", work / "r.csv") == 0
    rows = _rows(work / "r.csv")
    assert rows[0][:3] == ["p", "n", "family"] and len(rows) == 3


def test_bad_config_exits_2(work, capsys):
    (work / "bad.json").write_text(json.dumps({"body_mode": "known"}))
    np.savetxt(work / "x.csv", np.ones((5, 3)), delimiter=",")
    assert _run("fit", "--config", work / "bad.json", "--data", work / "x.csv", "--out", work / "m.json") == 2
    assert "error" in capsys.readouterr().err


def test_malformed_csv_exits_2(work):
    (work / "x.csv").write_text("1,2,3\n4,nan,6\n")
    assert _run("fit", "--config", work / "fit.json", "--data", work / "x.csv", "--out", work / "m.json") == 2


def test_dimension_mismatch_exits_2(work):
    np.savetxt(work / "x.csv", np.ones((5, 3)), delimiter=",")
    _run("fit", "--config", work / "fit.json", "--data", work / "x.csv", "--out", work / "m.json")
    np.savetxt(work / "y.csv", np.ones((5, 2)), delimiter=",")
    assert _run("density", "--model", work / "m.json", "--points", work / "y.csv", "--out", work / "d.csv") == 2


def test_degenerate_sample_exits_3(work):
    np.savetxt(work / "x.csv", np.zeros((5, 3)), delimiter=",")
    assert _run("fit", "--config", work / "fit.json", "--data", work / "x.csv", "--out", work / "m.json") == 3


def test_module_entry_point(work):
    res = subprocess.run([sys.executable, "-m", "homlc", "sample", "--family", "exp", "--body",
                          str(work / "body.json"), "--n", "5", "--out", str(work / "s.csv")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
