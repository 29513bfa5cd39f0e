"""Failure-probability estimation on the circle limit state.

Grows the surrogate from 10 to 55 points with the accelerated design loop
and with random sampling, then compares both failure-probability estimates
against the analytic value. Writes ``pf_trajectory.csv`` (dataset_size,
pf_acc) for plotting the convergence of the adaptive estimate.

Usage: python3 demos/failure_probability.py [seed]
"""

import csv
import sys
import time

from accboed.benchmarks.problems import (
    CIRCLE_FAILURE_PROBABILITY,
    baseline_run,
    get_problem,
)
from accboed.engine import AccBoedConfig, acc_boed_run


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    problem = get_problem("circle")
    truth = CIRCLE_FAILURE_PROBABILITY

    t0 = time.time()
    config = AccBoedConfig(n_initial=problem.n_initial,
                           max_iterations=problem.n_iterations, seed=seed)
    result = acc_boed_run(problem, config)
    if result.error:
        raise SystemExit(f"design loop failed: {result.error}")
    final = result.records[-1]
    print(f"adaptive: {len(result.records) - 1} iterations in {time.time() - t0:.0f}s")

    random_final = baseline_run(problem, "Random", [final.dataset_size], seed=seed)[-1]

    print(f"{'method':>10} {'P_f':>12} {'rel. error':>11}")
    for name, value in [("analytic", truth),
                        ("adaptive", final.metric_value),
                        ("random", random_final.metric_value)]:
        rel = abs(value - truth) / truth
        print(f"{name:>10} {value:>12.6f} {rel:>10.2%}")

    with open("pf_trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset_size", "pf_acc"])
        for rec in result.records:
            writer.writerow([rec.dataset_size, repr(rec.metric_value)])
    print("wrote pf_trajectory.csv")


if __name__ == "__main__":
    main()
