#!/usr/bin/env python3
"""Run a benchmark preset over its seeds and print per-seed and summary metrics.

Examples:
    python scripts/run_benchmark.py linear
    python scripts/run_benchmark.py lorenz96-f10 --workers 4 --json out.json
    python scripts/run_benchmark.py lotka-volterra --seeds 0 1 -P lam=0.2
"""

import argparse
import json
import os
import time

from gvar.benchmarks import PRESETS, run_benchmark
from gvar.cli import parse_overrides

KEYS = ("acc", "ba", "auroc", "auprc", "ba_pos", "ba_neg", "chosen_xi")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("preset", choices=sorted(PRESETS))
    parser.add_argument("--seeds", type=int, nargs="+")
    parser.add_argument("-P", "--param", action="append", metavar="KEY=VALUE",
                        help="override a training setting of the preset")
    parser.add_argument("--workers", type=int, default=int(os.environ.get("GVAR_WORKERS", 1)))
    parser.add_argument("--json", help="write the full result here")
    args = parser.parse_args()

    start = time.perf_counter()
    result = run_benchmark(args.preset, args.seeds, parse_overrides(args.param), args.workers)
    elapsed = time.perf_counter() - start

    keys = [k for k in KEYS if k in result["summary"]]
    print("seed  " + "  ".join(f"{k:>9}" for k in keys))
    for seed, row in zip(result["seeds"], result["per_seed"]):
        print(f"{seed:>4}  " + "  ".join(f"{row.get(k, float('nan')):9.3f}" for k in keys))
    print("mean  " + "  ".join(f"{result['summary'][k]['mean']:9.3f}" for k in keys))
    print("sd    " + "  ".join(f"{result['summary'][k]['sd']:9.3f}" for k in keys))
    print(f"elapsed {elapsed:.0f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(dict(result, elapsed_s=elapsed), fh, indent=2)


if __name__ == "__main__":
    main()
