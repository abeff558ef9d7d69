"""Command-line entry point: ``gvar {simulate,infer,evaluate,gridsearch}``.

Every replicate ``r`` of a batch uses seed ``root + r`` for both simulation and
training, so a single replicate can be reproduced from the manifest alone.
Result files contain no timing information and are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

import gvar
from gvar import data as io
from gvar.errors import (
    ConfigError,
    DimensionError,
    DivergedTrainingError,
    GvarError,
    InsufficientDataError,
    NoStableStructureError,
    ParseError,
    SingularityError,
    UndefinedMetricError,
    UndefinedTestError,
    UsageError,
)
from gvar.inference import default_xi_grid, infer
from gvar.metrics import evaluate
from gvar.simulators import SimConfig, simulate
from gvar.training import TrainConfig
from gvar.var_baseline import fit_var, test_gc, var_signs

log = logging.getLogger("gvar")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
METRIC_KEYS = ("acc", "ba", "auroc", "auprc", "ba_pos", "ba_neg", "rmse")


def exit_code(exc):
    """Map an exception to the CLI exit code."""
    if isinstance(exc, (ConfigError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (DivergedTrainingError, NoStableStructureError, SingularityError,
                        UndefinedTestError, UndefinedMetricError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParseError, DimensionError, InsufficientDataError, OSError)):
        return EXIT_DATA
    return EXIT_NUMERIC if isinstance(exc, ArithmeticError) else EXIT_DATA


# -- configuration -----------------------------------------------------------

def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(pairs):
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        out[key.strip()] = _parse_value(value.strip())
    return out


def read_json_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a flat JSON object")
    return payload


def train_config(args):
    payload = read_json_config(args.config)
    payload.update(parse_overrides(args.param))
    return TrainConfig.from_dict(payload)


def sim_payload(args):
    if args.sim_config is None and not args.sim_param:
        return None
    payload = read_json_config(args.sim_config)
    payload.update(parse_overrides(args.sim_param))
    SimConfig.from_dict(payload)  # validate early
    return payload


def workers_from(args):
    if args.workers is not None:
        n = args.workers
    else:
        try:
            n = int(os.environ.get("GVAR_WORKERS", "1"))
        except ValueError:
            raise ConfigError("GVAR_WORKERS must be an integer") from None
    if n < 1:
        raise ConfigError(f"--workers must be >= 1, got {n}")
    return n


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- datasets ----------------------------------------------------------------

def _dataset_dirs(path):
    path = Path(path)
    if path.is_file():
        return [path]
    if (path / "series.csv").exists():
        return [path / "series.csv"]
    reps = sorted(p / "series.csv" for p in path.glob("replicate_*") if (p / "series.csv").exists())
    if not reps:
        raise ParseError(f"{path}: no series.csv found")
    return reps


def dataset_sources(args, n_replicates, root):
    """One source descriptor per replicate (data path or simulation payload)."""
    sim = sim_payload(args)
    if args.data is not None and sim is not None:
        raise ConfigError("give either --data or a simulation config, not both")
    if args.data is None and sim is None:
        raise ConfigError("no dataset: pass --data or --sim-config / -S")
    if sim is not None:
        return [{"sim": dict(sim, seed=root + r)} for r in range(n_replicates or 1)]
    files = _dataset_dirs(args.data)
    if n_replicates is None:
        n_replicates = len(files)
    truth_dir = Path(args.truth) if args.truth else None
    if len(files) > 1 and n_replicates > len(files):
        raise ConfigError(f"{len(files)} replicates on disk, {n_replicates} requested")
    out = []
    for r in range(n_replicates):
        f = files[r] if len(files) > 1 else files[0]
        out.append({"path": str(f), "truth": str(truth_dir or f.parent)})
    return out


def load_source(source):
    if "sim" in source:
        series, truth = simulate(SimConfig.from_dict(source["sim"]))
        return series, truth
    series = io.load_csv(source["path"])
    truth = io.read_truth(source["truth"])
    if truth is not None and truth.adjacency.shape != (series.p, series.p):
        raise DimensionError(f"truth is {truth.adjacency.shape}, series has p={series.p}")
    return series, truth


# -- one replicate -------------------------------------------------------------

def _write_coefficients(path, coefs):
    """Long-format trace: one row per (t, k, target, source)."""
    values = coefs.values
    n, K, p, _ = values.shape
    t, k, i, j = np.meshgrid(coefs.times, np.arange(1, K + 1), np.arange(p), np.arange(p),
                             indexing="ij")
    table = np.column_stack([t.ravel(), k.ravel(), i.ravel(), j.ravel(), values.ravel()])
    np.savetxt(path, table, delimiter=",", header="t,k,target,source,value", comments="",
               fmt=["%d", "%d", "%d", "%d", "%.8g"])


def run_gvar(series, config, xi, fallback, out_dir, write_coeffs):
    result = infer(series, config, xi=xi, fallback_quantile=fallback)
    if out_dir is not None:
        io.write_matrix(out_dir / "adjacency.csv", result.graph.A)
        io.write_matrix(out_dir / "sign.csv", result.graph.sign)
        io.write_matrix(out_dir / "strength_fwd.csv", result.strengths.S)
        io.write_matrix(out_dir / "strength_rev.csv", result.strengths_rev.S)
        np.savetxt(out_dir / "stability.csv",
                   np.column_stack([result.curve.xi, result.curve.agreement]),
                   delimiter=",", header="xi,agreement", comments="", fmt="%.17g")
        if write_coeffs:
            _write_coefficients(out_dir / "coeffs.csv", result.coefficients)
    info = {
        "chosen_xi": result.curve.chosen,
        "fallback": result.fallback,
        "final_loss_fwd": result.reports[0].final,
        "final_loss_rev": result.reports[1].final,
    }
    return result.graph.A, result.graph.sign, result.strengths.S, info


def run_var(series, K, q, out_dir):
    model = fit_var(series, K)
    gc = test_gc(model, series, q)
    sign = var_signs(model) * gc.adjacency
    strength = np.nan_to_num(gc.F, nan=0.0)
    if out_dir is not None:
        io.write_matrix(out_dir / "adjacency.csv", gc.adjacency)
        io.write_matrix(out_dir / "sign.csv", sign)
        io.write_matrix(out_dir / "strength_fwd.csv", strength)
        io.write_matrix(out_dir / "pvalues.csv", np.nan_to_num(gc.pvalues, nan=1.0))
        io.write_matrix(out_dir / "coeffs.csv", model.coefs.reshape(model.K, -1))
    return gc.adjacency, sign, strength, {"df": list(gc.df), "q": q}


def run_task(task):
    """Worker body: returns ``{"replicate", "metrics", "info"}`` or an error record."""
    r = task["replicate"]
    out_dir = Path(task["out_dir"]) if task.get("out_dir") else None
    try:
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        series, truth = load_source(task["source"])
        if task["method"] == "var":
            A, sign, S, info = run_var(series, task["K"], task["q"], out_dir)
        else:
            config = TrainConfig.from_dict(task["train"])
            A, sign, S, info = run_gvar(series, config, np.asarray(task["xi"]),
                                        task["fallback"], out_dir, task["write_coeffs"])
        metrics = None
        if truth is not None:
            metrics = evaluate(truth, A, S, sign).to_dict()
            if out_dir is not None:
                write_json(out_dir / "metrics.json", metrics)
        if out_dir is not None:
            write_json(out_dir / "result.json", info)
        return {"replicate": r, "metrics": metrics, "info": info, **task.get("tag", {})}
    except (GvarError, OSError, FloatingPointError, ArithmeticError) as exc:
        record = {"replicate": r, "error": f"{type(exc).__name__}: {exc}",
                  "code": exit_code(exc), **task.get("tag", {})}
        if out_dir is not None:
            write_json(out_dir / "error.json", record)
        return record


def run_tasks(tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, tasks))


def summarise(records):
    """Mean and SD (ddof=1) of every metric over the successful records."""
    ok = [rec for rec in records if "error" not in rec and rec.get("metrics")]
    summary = {"n_replicates": len(records), "n_ok": len(ok),
               "failed": [{"replicate": rec["replicate"], "error": rec["error"]}
                          for rec in records if "error" in rec]}
    for key in METRIC_KEYS:
        vals = [rec["metrics"][key] for rec in ok if key in rec["metrics"]]
        if vals:
            summary[key] = {"mean": float(np.mean(vals)),
                            "sd": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                            "n": len(vals)}
    return summary


def _batch_exit(records):
    codes = [rec["code"] for rec in records if "error" in rec]
    return codes[0] if codes else EXIT_OK


# -- subcommands -------------------------------------------------------------

def _base_tasks(args):
    if args.replicates is not None and args.replicates < 1:
        raise ConfigError(f"--replicates must be >= 1, got {args.replicates}")
    if args.xi_grid < 1:
        raise ConfigError(f"--xi-grid must be >= 1, got {args.xi_grid}")
    config = train_config(args)
    root = config.seed if args.seed is None else args.seed
    sources = dataset_sources(args, args.replicates, root)
    n = len(sources)
    tasks = []
    for r, source in enumerate(sources):
        tasks.append({
            "replicate": r,
            "source": source,
            "method": args.method,
            "train": config.replace(seed=root + r).to_dict(),
            "K": config.K,
            "q": args.q,
            "xi": default_xi_grid(args.xi_grid).tolist(),
            "fallback": args.fallback_quantile,
            "write_coeffs": not args.no_coeffs,
        })
    manifest = {
        "package_version": gvar.__version__,
        "method": args.method,
        "root_seed": root,
        "replicates": n,
        "train_config": config.to_dict(),
        "sim_config": sim_payload(args),
        "data": args.data,
        "xi_grid": args.xi_grid,
        "q": args.q,
        "fallback_quantile": args.fallback_quantile,
    }
    return tasks, manifest


def cmd_simulate(args):
    payload = sim_payload(args) or {}
    root = args.seed if args.seed is not None else int(payload.get("seed", 0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    configs = []
    for r in range(args.replicates):
        cfg = SimConfig.from_dict(dict(payload, seed=root + r))
        target = out if args.replicates == 1 else out / f"replicate_{r:02d}"
        target.mkdir(parents=True, exist_ok=True)
        series, truth = simulate(cfg)
        io.write_csv(target / "series.csv", series)
        io.write_truth(target, truth)
        configs.append(cfg.to_dict())
    write_json(out / "manifest.json", {
        "package_version": gvar.__version__, "command": "simulate",
        "root_seed": root, "replicates": args.replicates, "configs": configs})
    return EXIT_OK


def cmd_infer(args):
    tasks, manifest = _base_tasks(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest["command"] = "infer"
    write_json(out / "manifest.json", manifest)
    for t in tasks:
        t["out_dir"] = str(out / f"replicate_{t['replicate']:02d}")
    records = run_tasks(tasks, workers_from(args))
    summary = summarise(records)
    write_json(out / "summary.json", summary)
    for rec in records:
        if "error" in rec:
            log.error("replicate %d failed: %s", rec["replicate"], rec["error"])
    print(json.dumps({k: v for k, v in summary.items() if k != "failed"}, sort_keys=True))
    return _batch_exit(records)


def _parse_grid(text, name):
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from None
    if not grid:
        raise ConfigError(f"{name} grid is empty")
    return grid


def cmd_gridsearch(args):
    lams = _parse_grid(args.lambdas, "--lambdas")
    gammas = _parse_grid(args.gammas, "--gammas")
    if args.method != "gvar":
        raise ConfigError("grid search is only defined for --method gvar")
    base, manifest = _base_tasks(args)
    tasks = []
    for lam in lams:
        for gamma in gammas:
            for t in base:
                cell = dict(t, train=dict(t["train"], lam=lam, gamma=gamma),
                            write_coeffs=False, tag={"lam": lam, "gamma": gamma})
                TrainConfig.from_dict(cell["train"])
                tasks.append(cell)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest.update(command="gridsearch", lambdas=lams, gammas=gammas)
    write_json(out / "manifest.json", manifest)
    records = run_tasks(tasks, workers_from(args))
    rows = []
    for lam in lams:
        for gamma in gammas:
            cell = [rec for rec in records if rec["lam"] == lam and rec["gamma"] == gamma]
            s = summarise(cell)
            row = {"lambda": lam, "gamma": gamma, "n_ok": s["n_ok"]}
            for key in ("ba", "auprc", "auroc", "ba_pos", "ba_neg"):
                row[f"{key}_mean"] = s[key]["mean"] if key in s else float("nan")
                row[f"{key}_sd"] = s[key]["sd"] if key in s else float("nan")
            row["error"] = "; ".join(f["error"] for f in s["failed"])
            rows.append(row)
    header = list(rows[0])
    with open(out / "gridsearch.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[h]) for h in header) + "\n")
    write_json(out / "gridsearch.json", {"cells": rows, "records": records})
    best = max(rows, key=lambda r: -np.inf if np.isnan(r["ba_mean"]) else r["ba_mean"])
    print(json.dumps({"best_lambda": best["lambda"], "best_gamma": best["gamma"],
                      "best_ba": best["ba_mean"]}))
    return _batch_exit(records)


def _fmt_cell(value):
    if isinstance(value, str):
        return '"' + value.replace('"', "'") + '"' if value else ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _evaluate_dir(pred_dir, truth_dir):
    truth = io.read_truth(truth_dir)
    if truth is None:
        raise ParseError(f"{truth_dir}: no truth_adjacency.csv")
    A = io.read_matrix(pred_dir / "adjacency.csv", int)
    sign_path, score_path = pred_dir / "sign.csv", pred_dir / "strength_fwd.csv"
    sign = io.read_matrix(sign_path, int) if sign_path.exists() else None
    scores = io.read_matrix(score_path) if score_path.exists() else None
    return evaluate(truth, A, scores, sign).to_dict()


def cmd_evaluate(args):
    pred = Path(args.pred)
    truth = Path(args.truth)
    reps = sorted(p for p in pred.glob("replicate_*") if (p / "adjacency.csv").exists())
    if not reps:
        metrics = _evaluate_dir(pred, truth)
        payload = metrics
    else:
        records = []
        for r, rep in enumerate(reps):
            t_dir = truth / rep.name if (truth / rep.name).is_dir() else truth
            if not (t_dir / "truth_adjacency.csv").exists():
                t_dir = rep
            records.append({"replicate": r, "metrics": _evaluate_dir(rep, t_dir)})
        payload = summarise(records)
    if args.out:
        write_json(args.out, payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--data", help="series CSV, or a directory written by `gvar simulate`")
    p.add_argument("--truth", help="directory holding truth_adjacency.csv / truth_sign.csv")
    p.add_argument("--sim-config", help="JSON file of simulator settings")
    p.add_argument("-S", "--sim-param", action="append", metavar="KEY=VALUE",
                   help="override one simulator setting")


def _add_run_args(p):
    _add_data_args(p)
    p.add_argument("--config", help="JSON file of training settings")
    p.add_argument("-P", "--param", action="append", metavar="KEY=VALUE",
                   help="override one training setting")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="root seed; replicate r uses seed + r")
    p.add_argument("--replicates", type=int,
                   help="replicate count (default: every replicate under --data, else 1)")
    p.add_argument("--workers", type=int, help="worker processes (default: $GVAR_WORKERS or 1)")
    p.add_argument("--method", choices=("gvar", "var"), default="gvar")
    p.add_argument("--xi-grid", type=int, default=20, metavar="Q",
                   help="number of evenly spaced quantile levels")
    p.add_argument("--q", type=float, default=0.05, help="FDR level for the VAR baseline")
    p.add_argument("--fallback-quantile", type=float,
                   help="threshold used when no level is stable (default: fail)")
    p.add_argument("--no-coeffs", action="store_true", help="skip the coefficient trace CSV")


def build_parser():
    parser = argparse.ArgumentParser(prog="gvar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset")
    p.add_argument("--sim-config", "--config", dest="sim_config", help="JSON simulator settings")
    p.add_argument("-S", "--sim-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="infer summary graphs and signs")
    _add_run_args(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gridsearch", help="mean metrics over a lambda x gamma grid")
    _add_run_args(p)
    p.add_argument("--lambdas", default="0,0.75,1.5,2.25,3")
    p.add_argument("--gammas", default="0,0.005,0.01,0.015,0.02")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("evaluate", help="score inferred graphs against ground truth")
    p.add_argument("--pred", required=True, help="result directory (one replicate or a batch)")
    p.add_argument("--truth", required=True, help="directory with the truth CSVs")
    p.add_argument("--out", help="write the metrics JSON here as well")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    replicates = getattr(args, "replicates", None)
    if replicates is not None and replicates < 1:
        print("gvar: error: --replicates must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (GvarError, OSError, FloatingPointError, ArithmeticError) as exc:
        print(f"gvar: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
