"""Command-line entry point: generate, attack, train, benchmark, analyze.

Every command takes ``--config`` (a JSON file), ``--out``, ``--seed`` and
``--overwrite``; explicit flags override the config. Exit codes: 0 success,
2 invalid input or usage, 3 refusal to overwrite, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .attacks import ATTACKS
from .baselines import METHODS, run_method
from .errors import NumericalError, RobustGSLError, ValidationError
from .graph import GRAPH_FILES, PerturbationRecord, load_graph_dir, save_graph_dir, sbm_generate
from .learner import HyperParams, TrainResult

log = logging.getLogger("robustgsl")

EXIT_OK, EXIT_INVALID, EXIT_EXISTS, EXIT_NUMERIC = 0, 2, 3, 4

CONFIG_SECTIONS = {"dataset", "sbm", "attack", "defense", "benchmark", "analyze", "output"}

SBM_DEFAULTS = {"n_per_block": 100, "blocks": 2, "p_in": 0.1, "p_out": 0.01, "feature_noise": 1.25}


class RefuseOverwrite(Exception):
    pass


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _read_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{p}: top level must be a JSON object")
    if "dataset" in cfg and "sbm" in cfg:
        raise ValidationError(f"{p}: give either dataset paths or sbm parameters, not both")
    unknown = set(cfg) - CONFIG_SECTIONS
    if unknown:
        raise ValidationError(f"{p}: unknown config sections {sorted(unknown)}")
    return cfg


def _prepare_out(out, names, overwrite):
    out = Path(out)
    if not overwrite:
        existing = [n for n in names if (out / n).exists()]
        if existing:
            raise RefuseOverwrite(f"{out}: refusing to overwrite {', '.join(existing)} (pass --overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_assignments(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"expected KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _graph_dir_from(args, cfg, key="input"):
    path = getattr(args, key, None) or cfg.get("dataset", {}).get("dir")
    if path is None:
        raise ValidationError("no input graph: pass --input DIR or set dataset.dir in the config")
    path = Path(path)
    for name in GRAPH_FILES:
        if not (path / name).is_file():
            raise ValidationError(f"missing input file: {path / name}")
    return path


def _sbm_params(args, cfg):
    params = dict(SBM_DEFAULTS)
    params.update(cfg.get("sbm", {}))
    for key in SBM_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    params["seed"] = args.seed if args.seed is not None else params.get("seed", 0)
    unknown = set(params) - set(SBM_DEFAULTS) - {"seed"}
    if unknown:
        raise ValidationError(f"unknown sbm parameters: {sorted(unknown)}")
    return params


def _hyperparams(args, cfg, seed_default=0):
    defense = cfg.get("defense", {})
    hp = dict(defense.get("hyperparams", {}))
    hp.update(_parse_assignments(getattr(args, "hp", None)))
    if getattr(args, "outer_iters", None) is not None:
        hp["outer_iters"] = args.outer_iters
    if args.seed is not None:
        hp["seed"] = args.seed
    hp.setdefault("seed", seed_default)
    return HyperParams.from_json(hp)


# --------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg):
    params = _sbm_params(args, cfg)
    out = _prepare_out(args.out, GRAPH_FILES, args.overwrite)
    graph, _ = sbm_generate(**params)
    save_graph_dir(graph, out)
    log.info("wrote %d-node graph with %d edges to %s", graph.n, graph.num_edges, out)


def cmd_attack(args, cfg):
    spec = dict(cfg.get("attack", {}))
    if args.kind is not None:
        spec["kind"] = args.kind
    if args.rate is not None:
        spec["rate"] = args.rate
    if args.seed is not None:
        spec["seed"] = args.seed
    kind = spec.get("kind", "random")
    if kind not in ATTACKS:
        raise ValidationError(f"unknown attack kind {kind!r}; expected one of {', '.join(ATTACKS)}")
    graph = load_graph_dir(_graph_dir_from(args, cfg))
    out = _prepare_out(args.out, GRAPH_FILES + ("record.json",), args.overwrite)
    poisoned, record = ATTACKS[kind](graph, float(spec.get("rate", 0.0)), seed=int(spec.get("seed", 0)))
    save_graph_dir(poisoned, out)
    (out / "record.json").write_text(_dump_json(record.to_json()), encoding="utf-8")
    log.info("%s attack injected %d edges", kind, len(record.added_edges))


def _method_options(args, cfg):
    defense = cfg.get("defense", {})
    method = args.method or defense.get("method", "prognn")
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return method, {"svd_rank": defense.get("svd_rank"), "jaccard_threshold": defense.get("jaccard_threshold")}


def cmd_train(args, cfg):
    method, opts = _method_options(args, cfg)
    graph = load_graph_dir(_graph_dir_from(args, cfg))
    hp = _hyperparams(args, cfg)
    out = _prepare_out(args.out, ("result.json",), args.overwrite)
    result = run_method(method, graph, hp, **opts)
    sparse = bool(cfg.get("output", {}).get("sparse_S", False)) or args.sparse
    obj = result.to_json(sparse=sparse)
    obj["hyperparams"] = hp.to_json()
    (out / "result.json").write_text(_dump_json(obj), encoding="utf-8")
    log.info("%s: val %.4f test %.4f", method, result.best_val_accuracy, result.test_accuracy)


# benchmark ----------------------------------------------------------------

RUN_FIELDS = ["rate", "method", "seed", "test_accuracy", "best_val_accuracy"]


def _fmt(x):
    return repr(float(x))


def _run_cell(cell):
    """One (rate, method, seed) benchmark cell; module-level so it pickles."""
    rate, method, seed, source, attack_kind, hp_json, opts = cell
    if "sbm" in source:
        graph, _ = sbm_generate(**{**source["sbm"], "seed": seed})
    else:
        graph = load_graph_dir(source["dir"])
    poisoned, _ = ATTACKS[attack_kind](graph, rate, seed=seed)
    hp = HyperParams.from_json({**hp_json, "seed": seed})
    res = run_method(method, poisoned, hp, **opts)
    return rate, method, seed, res.test_accuracy, res.best_val_accuracy


def _read_runs(path):
    done = {}
    if not path.exists():
        return done
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["rate"]), row["method"], int(row["seed"]))
            done[key] = (float(row["test_accuracy"]), float(row["best_val_accuracy"]))
    return done


def _write_runs(path, done):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    for (rate, method, seed) in sorted(done):
        test, val = done[(rate, method, seed)]
        w.writerow([_fmt(rate), method, seed, _fmt(test), _fmt(val)])
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_benchmark(args, cfg):
    bench = dict(cfg.get("benchmark", {}))
    rates = [float(r) for r in (args.rates or bench.get("rates", [0.0, 0.05, 0.1, 0.15, 0.2, 0.25]))]
    methods = args.methods or bench.get("methods", ["gcn", "prognn"])
    n_seeds = args.n_seeds or bench.get("n_seeds")
    base_seed = args.seed if args.seed is not None else bench.get("seed", 0)
    seeds = list(range(base_seed, base_seed + n_seeds)) if n_seeds else bench.get("seeds", [base_seed])
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")
    attack_kind = args.kind or cfg.get("attack", {}).get("kind", "dissimilar")
    if attack_kind not in ATTACKS:
        raise ValidationError(f"unknown attack kind {attack_kind!r}")
    if args.input or cfg.get("dataset"):
        source = {"dir": str(_graph_dir_from(args, cfg))}
    else:
        sbm = _sbm_params(args, cfg)
        sbm.pop("seed")
        source = {"sbm": sbm}
    hp = _hyperparams(args, cfg).to_json()
    hp.pop("seed")
    _, opts = _method_options(argparse.Namespace(method=methods[0]), cfg)

    out = Path(args.out)
    runs_path, table_path = out / "runs.csv", out / "benchmark.csv"
    if args.resume:
        out.mkdir(parents=True, exist_ok=True)
    else:
        _prepare_out(out, ("runs.csv", "benchmark.csv", "benchmark_meta.json"), args.overwrite)
        if args.overwrite and runs_path.exists():
            runs_path.unlink()
    done = _read_runs(runs_path)
    cells = [(r, m, s) for r in rates for m in methods for s in seeds]
    todo = [c for c in cells if c not in done]
    log.info("benchmark: %d cells, %d cached, %d to run", len(cells), len(cells) - len(todo), len(todo))
    payload = [(r, m, s, source, attack_kind, hp, opts) for r, m, s in todo]
    if args.jobs > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for rate, method, seed, test, val in pool.map(_run_cell, payload):
                done[(rate, method, seed)] = (test, val)
                _write_runs(runs_path, done)
    else:
        for cell in payload:
            rate, method, seed, test, val = _run_cell(cell)
            done[(rate, method, seed)] = (test, val)
            _write_runs(runs_path, done)
    _write_runs(runs_path, done)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate", "method", "n", "mean", "std"])
    for rate in sorted(set(rates)):
        for method in sorted(set(methods)):
            acc = np.array([done[(rate, method, s)][0] for s in seeds])
            w.writerow([_fmt(rate), method, acc.size, _fmt(acc.mean()), _fmt(acc.std())])
    table_path.write_text(buf.getvalue(), encoding="utf-8")
    meta = {"cells": len(cells), "cache_hits": len(cells) - len(todo), "computed": len(todo)}
    (out / "benchmark_meta.json").write_text(_dump_json(meta), encoding="utf-8")


# analyze ------------------------------------------------------------------

REPORTS = ("spectrum", "rank_curve", "feature_density", "edge_weights")


def _load_matrix(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"missing input file: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        obj = json.loads(text)
        if isinstance(obj, dict) and "learned_S" in obj:
            return TrainResult.from_json(obj).learned_S
        return np.array(obj, dtype=float)
    return np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)


def cmd_analyze(args, cfg):
    spec = dict(cfg.get("analyze", {}))
    reports = args.reports or spec.get("reports", ["spectrum"])
    for r in reports:
        if r not in REPORTS:
            raise ValidationError(f"unknown report {r!r}; expected one of {', '.join(REPORTS)}")
    record_path = args.record or spec.get("record")
    result_path = args.result or spec.get("result")
    clean_path = args.clean or spec.get("clean")
    needs_record = {"rank_curve", "feature_density", "edge_weights"} & set(reports)
    if needs_record and not record_path:
        raise ValidationError(f"report(s) {', '.join(sorted(needs_record))} require --record")
    if "edge_weights" in reports and not (result_path and clean_path):
        raise ValidationError("edge_weights requires --result and --clean")
    record = None
    if record_path:
        if not Path(record_path).is_file():
            raise ValidationError(f"missing input file: {record_path}")
        record = PerturbationRecord.load(record_path)

    graph = None
    if args.input or cfg.get("dataset"):
        graph = load_graph_dir(_graph_dir_from(args, cfg))
    matrix_path = args.matrix or spec.get("matrix")

    names = {"spectrum": ("spectrum.csv",), "rank_curve": ("rank_curve.csv",),
             "feature_density": ("feature_density.csv",), "edge_weights": ("edge_weights.csv",)}
    out = _prepare_out(args.out, [n for r in reports for n in names[r]] + ["summary.json"], args.overwrite)
    summary = {}
    steps = int(args.steps or spec.get("steps", 10))
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))

    if "spectrum" in reports:
        if matrix_path:
            M = _load_matrix(matrix_path)
        elif graph is not None:
            M = graph.adjacency
        else:
            raise ValidationError("spectrum requires --matrix or --input")
        rep = analysis.singular_spectrum(M, spec.get("tol"))
        (out / "spectrum.csv").write_text(rep.to_csv(), encoding="utf-8")
        summary["spectrum"] = rep.to_json()
    if "rank_curve" in reports:
        if graph is None:
            raise ValidationError("rank_curve requires the poisoned graph via --input")
        curves = analysis.rank_decrease_curve(graph, record, min(steps, len(record.added_edges)), seed=seed)
        (out / "rank_curve.csv").write_text(curves.to_csv(), encoding="utf-8")
        summary["rank_curve"] = {"area_adversarial": curves.area("adversarial"), "area_normal": curves.area("normal")}
    if "feature_density" in reports:
        if graph is None:
            raise ValidationError("feature_density requires the poisoned graph via --input")
        dens = analysis.feature_diff_density(graph, record, int(spec.get("bins", 20)))
        (out / "feature_density.csv").write_text(dens.to_csv(), encoding="utf-8")
        summary["feature_density"] = {"mean_normal": dens.mean_normal, "mean_adversarial": dens.mean_adversarial,
                                      "adversarial_empty": dens.adversarial_empty}
    if "edge_weights" in reports:
        S = _load_matrix(result_path)
        clean = load_graph_dir(clean_path)
        rep = analysis.edge_weight_report(S, clean, record)
        (out / "edge_weights.csv").write_text(rep.to_csv(), encoding="utf-8")
        summary["edge_weights"] = rep.to_json()
    (out / "summary.json").write_text(_dump_json(summary), encoding="utf-8")


# --------------------------------------------------------------------------
# argument parsing


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="seed for all randomness in this command")
    common.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="robustgsl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample a stochastic block model graph")
    g.add_argument("--n-per-block", dest="n_per_block", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--p-in", dest="p_in", type=float)
    g.add_argument("--p-out", dest="p_out", type=float)
    g.add_argument("--feature-noise", dest="feature_noise", type=float)

    a = sub.add_parser("attack", parents=[common], help="inject edges into a graph")
    a.add_argument("--input", help="directory holding the clean graph files")
    a.add_argument("--kind", help=f"one of {', '.join(ATTACKS)}")
    a.add_argument("--rate", type=float)

    t = sub.add_parser("train", parents=[common], help="train a defense and write result.json")
    t.add_argument("--input", help="directory holding the (poisoned) graph files")
    t.add_argument("--method", help=f"one of {', '.join(METHODS)}")
    t.add_argument("--outer-iters", dest="outer_iters", type=int)
    t.add_argument("--hp", action="append", metavar="KEY=VALUE", help="hyperparameter override")
    t.add_argument("--sparse", action="store_true", help="store learned_S as triplets above 1e-4")

    b = sub.add_parser("benchmark", parents=[common], help="sweep perturbation rates x methods x seeds")
    b.add_argument("--input", help="fixed graph directory instead of per-seed SBM samples")
    b.add_argument("--rates", type=float, nargs="+")
    b.add_argument("--methods", nargs="+")
    b.add_argument("--n-seeds", dest="n_seeds", type=int)
    b.add_argument("--kind", help="attack kind")
    b.add_argument("--outer-iters", dest="outer_iters", type=int)
    b.add_argument("--hp", action="append", metavar="KEY=VALUE")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--resume", action="store_true", help="keep finished cells from runs.csv")
    for key in SBM_DEFAULTS:
        b.add_argument("--" + key.replace("_", "-"), dest=key, type=int if key in ("n_per_block", "blocks") else float)

    z = sub.add_parser("analyze", parents=[common], help="spectra, rank curves, densities, edge weights")
    z.add_argument("--input", help="poisoned graph directory")
    z.add_argument("--matrix", help="matrix CSV/JSON (or result.json) for the spectrum report")
    z.add_argument("--record", help="record.json from the attack")
    z.add_argument("--result", help="result.json from training")
    z.add_argument("--clean", help="clean graph directory")
    z.add_argument("--reports", nargs="+", help=f"subset of {', '.join(REPORTS)}")
    z.add_argument("--steps", type=int)
    return p


COMMANDS = {
    "generate": cmd_generate,
    "attack": cmd_attack,
    "train": cmd_train,
    "benchmark": cmd_benchmark,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _read_config(args.config)
        COMMANDS[args.command](args, cfg)
    except RefuseOverwrite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXISTS
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RobustGSLError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
