import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from robustgsl.cli import main
from robustgsl.graph import GRAPH_FILES, load_graph_dir

DEMO = Path(__file__).resolve().parents[1] / "configs" / "demo.json"
SMALL = ["--n-per-block", "20", "--p-in", "0.3", "--p-out", "0.03"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def clean_dir(tmp_path):
    out = tmp_path / "clean"
    assert run("generate", "--out", out, "--seed", 1, *SMALL) == 0
    return out


def test_generate_writes_four_files(clean_dir):
    for name in GRAPH_FILES:
        assert (clean_dir / name).is_file()
    assert load_graph_dir(clean_dir).n == 40


def test_generate_is_byte_identical_per_seed(tmp_path, clean_dir):
    assert run("generate", "--out", tmp_path / "again", "--seed", 1, *SMALL) == 0
    for name in GRAPH_FILES:
        assert (clean_dir / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_generate_invalid_probabilities(tmp_path, capsys):
    assert run("generate", "--out", tmp_path / "g", "--p-in", 0.1, "--p-out", 0.2) == 2
    assert "p_out < p_in" in capsys.readouterr().err


def test_refuses_to_overwrite(clean_dir):
    assert run("generate", "--out", clean_dir, "--seed", 2, *SMALL) == 3
    assert run("generate", "--out", clean_dir, "--seed", 2, *SMALL, "--overwrite") == 0


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sbm": {"n_per_block": 10, "p_in": 0.5, "p_out": 0.1}}))
    assert run("generate", "--config", cfg, "--out", tmp_path / "g", "--n-per-block", 15) == 0
    assert load_graph_dir(tmp_path / "g").n == 30


def test_bad_config_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("generate", "--config", bad, "--out", tmp_path / "g") == 2
    both = tmp_path / "both.json"
    both.write_text(json.dumps({"sbm": {}, "dataset": {"dir": "x"}}))
    assert run("generate", "--config", both, "--out", tmp_path / "g") == 2
    assert run("generate", "--config", tmp_path / "missing.json", "--out", tmp_path / "g") == 2


def test_attack_rate_zero_copies_edges(tmp_path, clean_dir):
    out = tmp_path / "p"
    assert run("attack", "--input", clean_dir, "--out", out, "--kind", "random", "--rate", 0) == 0
    assert (out / "edges.txt").read_bytes() == (clean_dir / "edges.txt").read_bytes()
    assert json.loads((out / "record.json").read_text())["added"] == []


def test_attack_counts(tmp_path, clean_dir):
    out = tmp_path / "p"
    assert run("attack", "--input", clean_dir, "--out", out, "--kind", "random", "--rate", 0.2, "--seed", 4) == 0
    n_edges = load_graph_dir(clean_dir).num_edges
    assert len(json.loads((out / "record.json").read_text())["added"]) == int(np.floor(0.2 * n_edges + 0.5))


def test_attack_unknown_kind(tmp_path, clean_dir):
    assert run("attack", "--input", clean_dir, "--out", tmp_path / "p", "--kind", "meta") == 2


def test_train_missing_input_names_path(tmp_path, capsys):
    assert run("train", "--input", tmp_path / "nowhere", "--out", tmp_path / "t") == 2
    assert "nowhere" in capsys.readouterr().err


@pytest.mark.parametrize("method", ["prognn", "prognn_two", "gcn", "gcn_svd", "gcn_jaccard", "gcn_nograph"])
def test_train_every_method(tmp_path, clean_dir, method):
    out = tmp_path / method
    assert run("train", "--input", clean_dir, "--out", out, "--method", method, "--outer-iters", 5) == 0
    res = json.loads((out / "result.json").read_text())
    assert 0.0 <= res["test_accuracy"] <= 1.0
    S = np.array(res["learned_S"])
    assert np.array_equal(S, S.T) and S.min() >= 0 and S.max() <= 1


def test_train_unknown_method_and_hp(tmp_path, clean_dir):
    assert run("train", "--input", clean_dir, "--out", tmp_path / "t", "--method", "gat") == 2
    assert run("train", "--input", clean_dir, "--out", tmp_path / "t", "--hp", "bogus=1") == 2
    assert run("train", "--input", clean_dir, "--out", tmp_path / "t", "--hp", "alpha") == 2


def test_train_numerical_failure_exit_code(tmp_path):
    g = tmp_path / "g"
    assert run("generate", "--out", g, "--seed", 1, *SMALL) == 0
    feats = np.loadtxt(g / "features.csv", delimiter=",") * 1e306
    (g / "features.csv").write_text("\n".join(",".join(repr(float(v)) for v in row) for row in feats) + "\n")
    with np.errstate(all="ignore"):
        assert run("train", "--input", g, "--out", tmp_path / "t", "--outer-iters", 3) == 4


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


BENCH = ["--rates", 0, 0.05, 0.25, "--methods", "gcn", "gcn_nograph", "--n-seeds", 3, "--outer-iters", 5, *SMALL]


def test_benchmark_shape_and_resume(tmp_path):
    out = tmp_path / "b"
    assert run("benchmark", "--out", out, *BENCH) == 0
    rows = read_csv(out / "benchmark.csv")
    assert len(rows) == 6
    assert all(r["n"] == "3" for r in rows)
    assert [(r["rate"], r["method"]) for r in rows] == sorted((r["rate"], r["method"]) for r in rows)
    runs = read_csv(out / "runs.csv")
    assert len(runs) == 18
    for r in rows:
        acc = [float(x["test_accuracy"]) for x in runs if x["rate"] == r["rate"] and x["method"] == r["method"]]
        assert float(r["mean"]) == pytest.approx(np.mean(acc))
        assert float(r["std"]) == pytest.approx(np.std(acc))
    first = (out / "benchmark.csv").read_bytes()

    # drop some finished cells and resume: only those are recomputed
    (out / "runs.csv").write_text("".join((out / "runs.csv").read_text().splitlines(True)[:13]))
    assert run("benchmark", "--out", out, *BENCH, "--resume") == 0
    meta = json.loads((out / "benchmark_meta.json").read_text())
    assert meta == {"cells": 18, "cache_hits": 12, "computed": 6}
    assert (out / "benchmark.csv").read_bytes() == first


def test_benchmark_single_seed_has_zero_std(tmp_path):
    out = tmp_path / "b"
    assert run("benchmark", "--out", out, "--rates", 0.1, "--methods", "gcn", "--n-seeds", 1,
               "--outer-iters", 3, *SMALL) == 0
    assert float(read_csv(out / "benchmark.csv")[0]["std"]) == 0.0


def test_benchmark_parallel_matches_serial(tmp_path):
    args = ["--rates", 0, 0.1, "--methods", "gcn", "--n-seeds", 2, "--outer-iters", 3, *SMALL]
    assert run("benchmark", "--out", tmp_path / "s", *args) == 0
    assert run("benchmark", "--out", tmp_path / "p", *args, "--jobs", 2) == 0
    for name in ("runs.csv", "benchmark.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_benchmark_refuses_overwrite(tmp_path):
    args = ["--rates", 0, "--methods", "gcn", "--n-seeds", 1, "--outer-iters", 2, *SMALL]
    assert run("benchmark", "--out", tmp_path / "b", *args) == 0
    assert run("benchmark", "--out", tmp_path / "b", *args) == 3


def test_analyze_spectrum_of_diagonal_fixture(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("3,0,0\n0,1,0\n0,0,0\n")
    assert run("analyze", "--matrix", m, "--out", tmp_path / "a", "--reports", "spectrum") == 0
    rows = read_csv(tmp_path / "a" / "spectrum.csv")
    assert [float(r["singular_value"]) for r in rows] == [3.0, 1.0, 0.0]
    assert json.loads((tmp_path / "a" / "summary.json").read_text())["spectrum"]["numerical_rank"] == 2


def test_analyze_edge_weights_requires_record(tmp_path, clean_dir):
    assert run("analyze", "--input", clean_dir, "--out", tmp_path / "a", "--reports", "edge_weights",
               "--clean", clean_dir, "--result", tmp_path / "r.json") == 2


def test_demo_pipeline_end_to_end(tmp_path):
    c = ["--config", DEMO]
    assert run("generate", *c, "--out", tmp_path / "g", "--seed", 0) == 0
    assert run("attack", *c, "--input", tmp_path / "g", "--out", tmp_path / "p") == 0
    assert run("train", *c, "--input", tmp_path / "p", "--out", tmp_path / "t") == 0
    assert run("analyze", *c, "--input", tmp_path / "p", "--record", tmp_path / "p" / "record.json",
               "--result", tmp_path / "t" / "result.json", "--clean", tmp_path / "g", "--out", tmp_path / "a") == 0
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    ew = summary["edge_weights"]
    assert ew["mean_adversarial"] < ew["mean_normal"]
    fd = summary["feature_density"]
    assert fd["mean_adversarial"] > fd["mean_normal"]
    for name in ("spectrum.csv", "rank_curve.csv", "feature_density.csv", "edge_weights.csv"):
        assert (tmp_path / "a" / name).is_file()


def test_console_module_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "robustgsl.cli", "generate", "--out", str(tmp_path / "g"),
                           "--p-in", "0.1", "--p-out", "0.5"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "p_out" in proc.stderr
