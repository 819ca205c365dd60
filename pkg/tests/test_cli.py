"""End-to-end command-line workflows on small synthetic datasets."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from gfam.cli import main


def write_toy_data(path: Path, seed=0, n=12, nt=8, family="gaussian", trials=6):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, nt)
    x = rng.uniform(0, 1, n)
    eta = np.sin(2 * np.pi * t)[None, :] + 0.8 * (x - 0.5)[:, None]
    if family == "gaussian":
        y = eta + rng.normal(0, 0.25, eta.shape)
    else:
        y = rng.binomial(trials, 1 / (1 + np.exp(-eta))).astype(float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve", "t", "y", "x"])
        for i in range(n):
            for j in range(nt):
                w.writerow([f"c{i}", t[j], y[i, j], x[i]])


def toy_config(family=None):
    return {
        "schema": "gfam-config-v1",
        "family": family or {"name": "gaussian"},
        "terms": [
            {"kind": "intercept",
             "basis_t": {"kind": "bspline", "num_basis": 6}},
            {"kind": "smooth-scalar", "covariates": ["x"],
             "basis_x": {"kind": "bspline", "num_basis": 5},
             "basis_t": {"kind": "bspline", "num_basis": 4}},
        ],
        "optimizer": {"gtol": 1e-2, "max_outer": 60},
    }


@pytest.fixture()
def workdir(tmp_path):
    write_toy_data(tmp_path / "data.csv")
    (tmp_path / "config.json").write_text(json.dumps(toy_config()))
    return tmp_path


def run(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def test_fit_produces_artifacts(workdir):
    out = workdir / "out"
    res = run(["fit", "--data", str(workdir / "data.csv"),
               "--config", str(workdir / "config.json"), "--out", str(out)])
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "fit.json").read_text())
    assert doc["schema"] == "gfam-fit-v1"
    assert len(doc["theta"]) == sum(b["dim"] for b in doc["blocks"])
    assert all(lam > 0 for lam in doc["lambda"])
    assert (out / "fitted.csv").exists()
    assert list(out.glob("term_*.csv"))


def test_missing_column_is_reported(workdir):
    bad = workdir / "bad.csv"
    rows = (workdir / "data.csv").read_text().splitlines()
    bad.write_text("\n".join(r.replace("y", "resp") if i == 0 else r
                             for i, r in enumerate(rows)))
    res = run(["fit", "--data", str(bad),
               "--config", str(workdir / "config.json"),
               "--out", str(workdir / "o")])
    assert res.exit_code == 1
    assert "'y'" in res.output


def test_unknown_config_key_is_rejected(workdir):
    cfg = toy_config()
    cfg["termz"] = cfg.pop("terms")
    (workdir / "c2.json").write_text(json.dumps(cfg))
    res = run(["fit", "--data", str(workdir / "data.csv"),
               "--config", str(workdir / "c2.json"),
               "--out", str(workdir / "o")])
    assert res.exit_code == 1
    assert "termz" in res.output


def test_fixed_lambda_reproduces_coefficients(workdir):
    out1 = workdir / "o1"
    res = run(["fit", "--data", str(workdir / "data.csv"),
               "--config", str(workdir / "config.json"), "--out", str(out1)])
    assert res.exit_code == 0
    doc = json.loads((out1 / "fit.json").read_text())
    fl = ",".join(repr(v) for v in doc["lambda"])
    cfg = toy_config(family={"name": "gaussian", "nu": doc["nu"][0],
                             "estimate_nu": False})
    (workdir / "c3.json").write_text(json.dumps(cfg))
    out2 = workdir / "o2"
    res2 = run(["fit", "--data", str(workdir / "data.csv"),
                "--config", str(workdir / "c3.json"),
                "--out", str(out2), "--fixed-lambda", fl])
    assert res2.exit_code == 0
    doc2 = json.loads((out2 / "fit.json").read_text())
    assert np.allclose(doc["theta"], doc2["theta"], atol=1e-8)


def test_predict_on_training_data_matches_fitted(workdir):
    out = workdir / "out"
    run(["fit", "--data", str(workdir / "data.csv"),
         "--config", str(workdir / "config.json"), "--out", str(out)])
    pred = workdir / "pred.csv"
    res = run(["predict", "--fit", str(out / "fit.json"),
               "--data", str(workdir / "data.csv"), "--out", str(pred)])
    assert res.exit_code == 0
    with open(out / "fitted.csv") as fh:
        fitted = list(csv.DictReader(fh))
    with open(pred) as fh:
        predicted = list(csv.DictReader(fh))
    a = np.array([float(r["eta_hat"]) for r in fitted])
    b = np.array([float(r["eta_hat"]) for r in predicted])
    assert np.allclose(a, b, atol=1e-10)


def test_binomial_fit_keeps_mu_in_unit_interval(tmp_path):
    write_toy_data(tmp_path / "data.csv", family="binomial", trials=6)
    cfg = toy_config(family={"name": "binomial", "trials": 6})
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    out = tmp_path / "out"
    res = run(["fit", "--data", str(tmp_path / "data.csv"),
               "--config", str(tmp_path / "config.json"), "--out", str(out)])
    assert res.exit_code in (0, 2), res.output
    with open(out / "fitted.csv") as fh:
        mus = [float(r["mu_hat"]) for r in csv.DictReader(fh)]
    assert all(0.0 < m < 1.0 for m in mus)
    pred = tmp_path / "p.csv"
    res2 = run(["predict", "--fit", str(out / "fit.json"),
                "--data", str(tmp_path / "data.csv"), "--out", str(pred)])
    assert res2.exit_code == 0
    assert "brier" in res2.output


def test_simulate_is_deterministic(tmp_path):
    cfg = {"schema": "gfam-sim-v1",
           "scenario": {"study": "wangshi43", "setting": "int",
                        "family": "binomial", "n": 12, "T": 15, "seed": 2}}
    (tmp_path / "sim.json").write_text(json.dumps(cfg))
    outs = []
    for name in ("a", "b"):
        res = run(["simulate", "--config", str(tmp_path / "sim.json"),
                   "--out", str(tmp_path / name), "--replicates", "2"])
        assert res.exit_code == 0, res.output
        with open(tmp_path / name / "replicates.csv") as fh:
            rows = [{k: v for k, v in row.items() if k != "seconds"}
                    for row in csv.DictReader(fh)]
        outs.append(rows)
    assert outs[0] == outs[1]
    with open(tmp_path / "a" / "summary.csv") as fh:
        table = {r["metric"]: r for r in csv.DictReader(fh)}
    assert table["rrimse_eta"]["n"] == "2"
    assert 0.0 <= float(table["coverage_eta"]["median"]) <= 1.0


def test_report_renders_line_and_surface_plots(workdir):
    out = workdir / "out"
    run(["fit", "--data", str(workdir / "data.csv"),
         "--config", str(workdir / "config.json"), "--out", str(out)])
    res = run(["report", "--results", str(out)])
    assert res.exit_code == 0, res.output
    svgs = list(out.glob("*.svg"))
    assert len(svgs) == 2
    intercept_svg = next(p for p in svgs if "intercept" in p.name).read_text()
    assert intercept_svg.count("<polyline") == 3
    surface = next(p for p in out.glob("term_*.csv") if "smoo" in p.name
                   or "intercept" not in p.name)
    rows = list(csv.DictReader(open(surface)))
    vals = [float(r["estimate"]) for r in rows]
    heat_svg = next(p for p in svgs if p.stem == surface.stem).read_text()
    assert f"{min(vals):.3g}" in heat_svg and f"{max(vals):.3g}" in heat_svg
    assert (out / "report.md").exists()


def test_report_empty_directory_fails(tmp_path):
    res = run(["report", "--results", str(tmp_path)])
    assert res.exit_code == 1
