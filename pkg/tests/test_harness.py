import csv
import io
import json

import numpy as np
import pytest

from netrecover.cli import main
from netrecover.harness import (
    ExperimentConfig, relative_error, rewiring_check, run_experiment, heterogeneity_sweep,
)


def small(**kw):
    doc = {"network": {"generator": "er", "n": 150, "p": 0.05, "seed": 1}, "model": "epidemic",
           "schemes": ["VS"], "sample_size": 8, "repeats": 4, "seed": 3}
    doc.update(kw)
    return doc


def read_report(text):
    lines = text.splitlines()
    assert lines[0] == "# schema_version=1"
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_relative_error_examples():
    x = np.array([1.0, 2.0, 3.0])
    assert relative_error(x, x) == 0.0
    assert relative_error(np.full(4, 1.03), np.ones(4)) == pytest.approx(0.03)
    z = np.array([1.1, 1.7, 3.3])
    assert relative_error(5 * z, 5 * x) == pytest.approx(relative_error(z, x), rel=1e-12)
    # zero truth stays finite
    assert np.isfinite(relative_error([0.0, 1.0], [0.0, 1.0]))
    with pytest.raises(ValueError):
        relative_error([1.0], [1.0, 2.0])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(small(repeats=0))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(small(schemes=["XX"]))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(small(bogus=1))
    cfg = ExperimentConfig.from_dict(small(sample_size={"fraction": 0.05}))
    assert cfg.resolve_m(1000) == 50
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(small(sample_size=0)).resolve_m(10)


def test_full_sample_zero_error():
    rep = run_experiment(small(sample_size={"fraction": 1.0}, repeats=1))
    s = rep.summary["schemes"]["VS"]
    assert s["mean_relerr_meanfield"] <= 1e-6
    assert s["n_vertices"] == 150


def test_regular_network_exact_but_naive_not():
    rep = run_experiment(small(network={"generator": "regular", "n": 100, "k": 6, "seed": 2},
                               params={"B": 1.0, "R": 1.0}, beta="true"))
    s = rep.summary["schemes"]["VS"]
    assert s["max_abserr_meanfield"] <= 1e-7
    assert s["mean_relerr_naive"] > 0.01


def test_metric_consistency_and_rows():
    rep = run_experiment(small(schemes=["VS", "RW"]))
    rows = read_report(rep.report_csv())
    for scheme in ("VS", "RW"):
        sel = [r for r in rows if r["scheme"] == scheme]
        assert all(int(r["n_samples"]) >= 1 for r in sel)
        for method in ("meanfield", "naive"):
            z = np.array([float(r[f"z_{method}"]) for r in sel])
            x = np.array([float(r["x_true"]) for r in sel])
            agg = rep.summary["schemes"][scheme][f"mean_relerr_{method}"]
            assert abs(relative_error(z, x) - agg) <= 1e-12
            assert abs(np.mean([float(r[f"relerr_{method}"]) for r in sel]) - agg) <= 1e-12
    runs = read_report(rep.runs_csv())
    assert len(runs) == 8 and {r["status"] for r in runs} == {"ok"}


def test_vertex_averaging_over_repeats():
    rep = run_experiment(small(sample_size=60, repeats=5))
    counts = [r["n_samples"] for r in rep.vertices]
    assert max(counts) > 1
    assert sum(counts) == 5 * 60


def test_failures_are_counted():
    rep = run_experiment(small(schemes=["IndVS"], sample_size=5, repeats=6,
                               network={"generator": "er", "n": 300, "p": 0.005, "seed": 4}))
    s = rep.summary["schemes"]["IndVS"]
    assert s["repeats_ok"] + s["repeats_failed"] == 6
    assert sum(s["failures"].values()) == s["repeats_failed"]
    assert s["repeats_failed"] > 0


def test_determinism_and_threads(tmp_path):
    a = run_experiment(small(output=str(tmp_path / "a")))
    b = run_experiment(small(output=str(tmp_path / "b"), threads=2))
    for name in ("report.csv", "runs.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert meta["config"]["seed"] == 3 and "numpy" in meta["versions"] and "timestamp" in meta
    assert a.report_csv() == b.report_csv()


def test_different_seed_changes_report():
    assert run_experiment(small()).report_csv() != run_experiment(small(seed=4)).report_csv()


def test_rewiring_regular_identical():
    rep = rewiring_check(small(network={"generator": "regular", "n": 80, "k": 4, "seed": 5}, model="gene"))
    assert rep.summary["max_abs_diff"] <= 1e-8


def test_sweep_small(tmp_path):
    sweep = [
        {"generator": "er", "n": 200, "p": 0.03, "seed": 1},
        {"generator": "scale_free", "n": 200, "m_attach": 3, "pref": 0.0, "seed": 2},
        {"generator": "scale_free", "n": 200, "m_attach": 3, "pref": 1.0, "seed": 3},
    ]
    rep = heterogeneity_sweep(small(network={}, sweep=sweep, repeats=3, output=str(tmp_path)))
    hs = [r["heterogeneity"] for r in rep.rows]
    assert hs[0] < hs[2]
    assert (tmp_path / "sweep.csv").read_text().startswith("# schema_version=1")
    assert "spearman_rho" in rep.summary["schemes"]["VS"]


def test_cli_pipeline(tmp_path, capsys):
    g = tmp_path / "g"
    assert main(["generate", "--kind", "er", "--n", "200", "--param", "p=0.04", "--seed", "1", "--out", str(g)]) == 0
    assert main(["sample", "--graph", str(g / "graph.edges"), "--scheme", "VS", "--m", "12",
                 "--seed", "2", "--out", str(tmp_path / "s")]) == 0
    assert main(["estimate", "--sample", str(tmp_path / "s" / "sample.json"), "--out", str(tmp_path / "e")]) == 0
    est = json.loads((tmp_path / "e" / "summary.json").read_text())
    assert est["beta_hat"] > 0
    for method in ("mean_field", "naive"):
        assert main(["solve", "--method", method, "--sample", str(tmp_path / "s" / "sample.json"),
                     "--model", "gene", "--out", str(tmp_path / method)]) == 0
        rows = read_report((tmp_path / method / "report.csv").read_text())
        assert len(rows) == 12
    assert main(["solve", "--method", "full", "--graph", str(g / "graph.edges"), "--model", "epidemic",
                 "--out", str(tmp_path / "full")]) == 0


def test_cli_experiment_commands(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(small()))
    out = tmp_path / "x"
    assert main(["experiment", "--config", str(cfg), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} >= {"report.csv", "summary.json", "meta.json"}
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "y"), "--seed", "3"]) == 0
    assert (out / "report.csv").read_bytes() == (tmp_path / "y" / "report.csv").read_bytes()
    assert main(["rewire-check", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    sweep = small(network={}, repeats=2, sweep=[{"generator": "er", "n": 100, "p": 0.05, "seed": 1},
                                                {"generator": "scale_free", "n": 100, "m_attach": 2, "seed": 2}])
    cfg.write_text(json.dumps(sweep))
    assert main(["heterogeneity-sweep", "--config", str(cfg), "--out", str(tmp_path / "h")]) == 0


def test_cli_errors(tmp_path, capsys):
    assert main(["estimate", "--sample", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["nope"])
