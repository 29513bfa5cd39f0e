"""Adaptive surrogate construction on the trigonometric benchmark.

Runs the accelerated design loop and the two non-adaptive baselines from 30
to 49 observations of sin(x1)*cos(x2), then prints the RMSE trajectory of
each and writes ``rmse_curves.csv`` (columns: dataset_size, acc, random,
lhs) for plotting, e.g.::

    import pandas as pd
    pd.read_csv("rmse_curves.csv").plot(x="dataset_size", logy=True)

Usage: python3 demos/surrogate_accuracy.py [seed]
"""

import csv
import sys
import time

from accboed.benchmarks.problems import baseline_run, get_problem
from accboed.engine import AccBoedConfig, acc_boed_run


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    problem = get_problem("trig")
    sizes = list(range(problem.n_initial, problem.n_initial + problem.n_iterations + 1))

    t0 = time.time()
    config = AccBoedConfig(n_initial=problem.n_initial,
                           max_iterations=problem.n_iterations, seed=seed)
    result = acc_boed_run(problem, config)
    if result.error:
        raise SystemExit(f"design loop failed: {result.error}")
    acc = {r.dataset_size: r.metric_value for r in result.records}
    print(f"design loop: {len(result.records) - 1} iterations in {time.time() - t0:.0f}s")

    random = {r.dataset_size: r.metric_value
              for r in baseline_run(problem, "Random", sizes, seed=seed)}
    lhs = {r.dataset_size: r.metric_value
           for r in baseline_run(problem, "Lhs", sizes, seed=seed)}

    print(f"{'size':>5} {'adaptive':>10} {'random':>10} {'lhs':>10}")
    with open("rmse_curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset_size", "acc", "random", "lhs"])
        for size in sizes:
            row = [size, acc.get(size), random.get(size), lhs.get(size)]
            writer.writerow(row)
            cells = "".join(f"{v:>10.4f}" if v is not None else f"{'-':>10}" for v in row[1:])
            print(f"{size:>5} {cells}")
    print("wrote rmse_curves.csv")


if __name__ == "__main__":
    main()
