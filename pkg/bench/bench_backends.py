#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Each (backend, task) measurement runs in a child process with
PROXOUT_BACKEND set, so the import-time backend selection stays clean and
numba's on-disk cache is exercised the way real runs see it.

Usage: python bench/bench_backends.py [--records N] [--trees T] [--repeat R]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

TASKS = ("fit_forest", "proximity", "gap_proximity")


def _run_task(task: str, records: int, trees: int, repeat: int) -> dict:
    import numpy as np

    from proxout import (ForestParams, SyntheticSpec, fit_forest,
                         gap_proximity_matrix, generate_synthetic,
                         proximity_matrix)
    from proxout._backend import active_backend

    spec = SyntheticSpec(n_classes=3, records_per_class=records // 3,
                         numeric_dims=8, class_separation=4.0,
                         contamination_fraction=0.05, horizon=10, seed=0)
    dataset = generate_synthetic(spec).dataset
    params = ForestParams(n_trees=trees, seed=0)
    forest = fit_forest(dataset, params)  # warm compile before timing

    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        if task == "fit_forest":
            fit_forest(dataset, params)
        elif task == "proximity":
            proximity_matrix(forest, dataset)
        else:
            gap_proximity_matrix(forest, dataset)
        times.append(time.perf_counter() - t0)
    return {"backend": active_backend(), "task": task,
            "best_s": min(times), "mean_s": float(np.mean(times))}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", type=int, default=600)
    parser.add_argument("--trees", type=int, default=60)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", default=None, help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        print(json.dumps(_run_task(args.worker, args.records, args.trees,
                                   args.repeat)))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        for task in TASKS:
            env = dict(os.environ, PROXOUT_BACKEND=backend)
            proc = subprocess.run(
                [sys.executable, __file__, "--worker", task,
                 "--records", str(args.records), "--trees", str(args.trees),
                 "--repeat", str(args.repeat)],
                env=env, capture_output=True, text=True)
            if proc.returncode != 0:
                print(proc.stderr, file=sys.stderr)
                return 1
            row = json.loads(proc.stdout.strip().splitlines()[-1])
            results[(backend, task)] = row["best_s"]

    print(f"\nrecords={args.records} trees={args.trees} "
          f"(best of {args.repeat})")
    print(f"{'task':<16}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for task in TASKS:
        nb = results[("numba", task)]
        np_ = results[("numpy", task)]
        print(f"{task:<16}{nb:>11.3f}s{np_:>11.3f}s{np_ / nb:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
