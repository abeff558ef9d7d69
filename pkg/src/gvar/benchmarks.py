"""Benchmark presets: simulator settings plus tuned training settings.

Each preset is run as ``run_benchmark(name, seeds)``; seed ``s`` drives both the
simulation and the network initialisation of that replicate.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from gvar.inference import infer
from gvar.metrics import evaluate
from gvar.simulators import SimConfig, simulate
from gvar.training import TrainConfig


@dataclass(frozen=True)
class Preset:
    sim: dict
    train: dict
    seeds: tuple = (0, 1, 2, 3, 4)


PRESETS = {
    "linear": Preset(
        sim={"system": "linear"},
        train={"K": 1, "lam": 0.2, "gamma": 0.5},
        seeds=tuple(range(10)),
    ),
    "lorenz96-f10": Preset(
        sim={"system": "lorenz96", "F": 10.0},
        train={"K": 5, "lam": 1.5, "gamma": 0.01},
    ),
    "lorenz96-f40": Preset(
        sim={"system": "lorenz96", "F": 40.0, "stride": 5},
        train={"K": 5, "lam": 2.25, "gamma": 0.01},
    ),
    "lotka-volterra": Preset(
        sim={"system": "lotka_volterra"},
        train={"K": 1, "lam": 0.2, "gamma": 0.005, "epochs": 500, "batch_size": 256},
    ),
}


def run_replicate(name, seed, overrides=None):
    """Simulate, infer and score one replicate; returns the metric dict."""
    preset = PRESETS[name]
    series, truth = simulate(SimConfig.from_dict(dict(preset.sim, seed=seed)))
    config = TrainConfig.from_dict(dict(preset.train, seed=seed, **(overrides or {})))
    result = infer(series, config)
    metrics = evaluate(truth, result.graph.A, result.strengths.S, result.graph.sign).to_dict()
    metrics["chosen_xi"] = result.curve.chosen
    return metrics


def _task(args):
    return run_replicate(*args)


def run_benchmark(name, seeds=None, overrides=None, workers=1):
    """Per-seed metrics and their mean/SD (ddof=1) for a preset."""
    seeds = PRESETS[name].seeds if seeds is None else tuple(seeds)
    tasks = [(name, s, overrides) for s in seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    summary = {}
    for key in rows[0]:
        vals = np.array([r.get(key, np.nan) for r in rows], dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size:
            sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            summary[key] = {"mean": float(vals.mean()), "sd": sd}
    return {"preset": name, "seeds": list(seeds), "per_seed": rows, "summary": summary}
