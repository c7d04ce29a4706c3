import csv
import io
import json
import math

import numpy as np
import pytest

from dmesi.bounds import baseline_bound
from dmesi.chains import delta_prime
from dmesi.cli import SIM_COLUMNS, ExperimentConfig, main
from dmesi.protocol import THREADS_ENV, generate_instance


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


SMALL = ["--n", "4", "--d", "64", "--r", "32", "--trials", "40"]


def test_simulate_schema_and_wz_bound(capsys):
    code, out, _ = run(capsys, "simulate", *SMALL, "--strategy", "wz", "--instance-mode", "derive")
    assert code == 0
    assert out.splitlines()[0] == ",".join(SIM_COLUMNS)
    (row,) = rows_of(out)
    assert row["estimator"] == "wz" and row["k"] == "8" and row["improvement_region"] == "0"
    inst = generate_instance(4, 64, "derive", 0)
    assert float(row["bound"]) == pytest.approx(baseline_bound(inst.table.delta_s, 4, 64, 32), rel=1e-11)
    assert float(row["ratio_emp_bound"]) == pytest.approx(float(row["mse_empirical"]) / float(row["bound"]),
                                                          rel=1e-10)


def test_simulate_rows_per_instance(capsys):
    code, out, _ = run(capsys, "simulate", *SMALL, "--instances", "2")
    rows = rows_of(out)
    assert code == 0
    assert [(r["estimator"], r["seed"]) for r in rows] == [
        ("wz", "0"), ("pro-alg2", "0"), ("wz", "1"), ("pro-alg2", "1")]
    for r in rows:
        for col in ("mse_empirical", "bound"):
            assert len(r[col].replace("-", "").replace(".", "").split("e")[0]) <= 12


def test_simulate_deterministic(capsys, tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", *SMALL, "--out", str(a)]) == 0
    monkeypatch.setenv(THREADS_ENV, "4")
    assert main(["simulate", *SMALL, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_invalid_config_names_field(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--trials", "0")
    assert code != 0 and "trials" in err
    code, _, err = run(capsys, "simulate", "--n", "16", "--d", "32", "--r", "64")
    assert code != 0 and "r:" in err
    cfg = write_json(tmp_path / "c.json", {"n": 4, "trails": 3})
    code, _, err = run(capsys, "simulate", "--config", cfg)
    assert code != 0 and "trails" in err
    code, _, err = run(capsys, "simulate", "--strategy", "file", "--chains", str(tmp_path / "nope"))
    assert code != 0 and "chains_path" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = write_json(tmp_path / "c.json", {"n": 4, "d": 64, "r": 32, "trials": 5, "seed": 3,
                                           "instance_mode": "derive", "strategy": "wz"})
    code, out, _ = run(capsys, "simulate", "--config", cfg, "--seed", "7")
    (row,) = rows_of(out)
    assert code == 0 and row["seed"] == "7" and row["trials"] == "5"


def test_bounds_wz_and_star(capsys):
    code, out, _ = run(capsys, "bounds", "--strategy", "wz")
    (row,) = rows_of(out)
    assert code == 0 and float(row["ratio"]) == 1.0
    code, out, _ = run(capsys, "bounds")
    wz, pro = rows_of(out)
    assert pro["estimator"] == "pro-alg2" and pro["improvement_region"] == "1"
    assert float(pro["ratio"]) < 1
    assert float(pro["ratio"]) == pytest.approx(float(pro["remark1_ratio"]), abs=1e-9)


def test_bounds_json_roundtrip(capsys, tmp_path):
    code, out, _ = run(capsys, "bounds", "--json", "--n", "8", "--d", "64", "--r", "32", "--seed", "4")
    assert code == 0
    doc = json.loads(out)
    f = tmp_path / "b.json"
    f.write_text(out)
    code, out2, _ = run(capsys, "bounds", "--json", "--config", str(f))
    assert code == 0 and json.loads(out2) == doc
    assert ExperimentConfig(**doc["config"]).n == 8


def hand_trace_table(tmp_path, d=8, n=3):
    scale = delta_prime(1.0, d, n)
    s = np.array([1.0, 10.0, 10.0]) / scale
    c = np.array([[0, 2, 2], [2, 0, 5], [2, 5, 0]]) / scale
    return write_json(tmp_path / "t.json", {"delta_s": s.tolist(), "delta_c": c.tolist()})


def test_chains_alg1_hand_trace(capsys, tmp_path):
    table = hand_trace_table(tmp_path)
    code, out, _ = run(capsys, "chains", "--strategy", "alg1", "--n", "3", "--d", "8", "--r", "8",
                       "--instance-mode", "table", "--validate", "--config",
                       write_json(tmp_path / "c.json", {"table_path": table}))
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    chains = [l.split("#")[0].strip() for l in lines]
    assert chains == ["0: y_0 -> x_0", "1: y_0 -> x_0 -> x_1", "2: y_0 -> x_0 -> x_2"]
    weights = [float(l.split("w=")[1].split()[0]) for l in lines]
    assert weights == pytest.approx([1.0, 3.0, 3.0])
    assert out.splitlines()[-1] == "# validate: ok"


def test_chains_alg2_equal_deltas(capsys, tmp_path):
    n = 5
    table = write_json(tmp_path / "t.json", {"delta_s": [2.0] * n,
                                              "delta_c": (np.ones((n, n)) - np.eye(n)).tolist()})
    code, out, _ = run(capsys, "chains", "--n", str(n), "--d", "64", "--r", "32",
                       "--instance-mode", "table", "--validate",
                       "--config", write_json(tmp_path / "c.json", {"table_path": table}))
    body = [l for l in out.splitlines() if not l.startswith("#")]
    assert code == 0 and len(body) == n
    assert all(l.split("#")[0].strip() == f"{i}: y_{i} -> x_{i}" for i, l in enumerate(body))


def test_chains_file_strategy(capsys, tmp_path):
    f = tmp_path / "chains.txt"
    f.write_text("0: y_0 -> x_0\n1: y_0 -> x_0 -> x_1\n2: y_2 -> x_2\n3: y_0 -> x_0 -> x_1 -> x_3\n")
    code, out, _ = run(capsys, "chains", "--strategy", "file", "--chains", str(f), "--n", "4",
                       "--d", "64", "--r", "32", "--validate")
    assert code == 0
    body = [l.split("#")[0].strip() for l in out.splitlines() if not l.startswith("#")]
    assert sorted(body) == sorted(f.read_text().splitlines())
    bad = tmp_path / "bad.txt"
    bad.write_text("0: y_1 -> x_1 -> x_0\n1: y_0 -> x_0 -> x_1\n")
    code, _, err = run(capsys, "chains", "--strategy", "file", "--chains", str(bad), "--n", "2",
                       "--d", "64", "--r", "32")
    assert code != 0 and "chains_path" in err


def test_region_boundary(capsys):
    code, out, _ = run(capsys, "region", "--n", "16", "--delta-i-min", "4.4", "--delta-i-max", "4.5",
                       "--steps", "2")
    lo, hi = rows_of(out)
    assert code == 0
    assert lo["in_region_eq15"] == "0" and hi["in_region_eq15"] == "1"
    assert float(lo["d_value"]) == pytest.approx(19.824, abs=1e-3)
    assert math.sqrt(float(lo["d_value"])) == pytest.approx(4.4524, abs=1e-4)


def test_region_sweep_properties(capsys):
    code, out, _ = run(capsys, "region", "--n", "16", "--delta-t", "0.7", "--delta-ti", "0.2",
                       "--delta-i-min", "0", "--delta-i-max", "60", "--steps", "601")
    rows = rows_of(out)
    assert code == 0
    for r in rows:
        di = float(r["delta_i"])
        if di * di <= 5 * 0.7**2:
            assert r["in_region_eq15"] == "0" and r["in_region_strict_eq17"] == "0"
        if r["in_region_strict_eq17"] == "1":
            assert r["in_region_eq15"] == "1"
    assert any(r["in_region_strict_eq17"] == "1" for r in rows)


def test_figures_written(capsys, tmp_path):
    fig = tmp_path / "region.png"
    assert main(["region", "--steps", "20", "--figure", str(fig), "--out", str(tmp_path / "r.csv")]) == 0
    assert fig.stat().st_size > 0 and (tmp_path / "r.csv").exists()
    fig = tmp_path / "sim.png"
    assert main(["simulate", *SMALL, "--figure", str(fig), "--out", str(tmp_path / "s.csv")]) == 0
    assert fig.stat().st_size > 0
