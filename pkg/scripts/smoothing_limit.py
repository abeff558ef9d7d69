#!/usr/bin/env python3
"""Largest step between consecutive coefficient matrices under a heavy smoothing weight.

A very large gamma should make the generalised coefficients nearly constant in
time, i.e. the model behaves like a penalised linear VAR.
"""

import argparse

import numpy as np

from gvar.model import coefficients_over_series
from gvar.simulators import SimConfig, simulate
from gvar.training import TrainConfig, fit


def max_step(seed=0, gamma=1e4, lam=0.2, epochs=2000):
    series, _ = simulate(SimConfig(system="linear", seed=seed))
    model, _ = fit(series, TrainConfig(K=1, lam=lam, gamma=gamma, epochs=epochs, seed=seed))
    values = coefficients_over_series(model, series).values
    steps = np.sqrt(np.sum(np.diff(values, axis=0) ** 2, axis=(1, 2, 3)))
    return float(steps.max())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--gamma", type=float, default=1e4)
    parser.add_argument("--epochs", type=int, default=2000)
    args = parser.parse_args()
    for seed in args.seeds:
        print(f"seed {seed}: max step {max_step(seed, args.gamma, epochs=args.epochs):.5f}")


if __name__ == "__main__":
    main()
