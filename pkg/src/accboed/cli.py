"""Command-line harness for sequential experimental-design runs.

Four commands operate on TOML run configurations:

``run``
    Execute one configured run, writing ``records.csv``, ``summary.json``
    and, for posterior problems, ``posterior_samples.csv`` into the output
    directory.
``compare``
    Execute several configurations of the same problem and join their final
    metrics into a comparison report plus a per-method timing table.
``bench-timing``
    Time one design-selection iteration with the accelerated and the
    reference estimator on identical frozen state and report the ratio.
``list-problems``
    Print the registered benchmark names, one per line.

Configuration format (TOML)::

    problem = "circle"        # registered problem name
    method = "AccBoed"        # AccBoed | BasicBoed | Random | Lhs
    output_dir = "runs/demo"  # artifacts land here (created if missing)
    seed = 0                  # master seed for every random stream

    [problem_args]            # optional: forwarded to the problem factory
    truth_samples = 2000      # (example: a kdv factory argument)

    [engine]                  # optional sequential-loop overrides
    n_z = 40                  # n_initial / max_iterations default to the
    max_iterations = 45       # problem preset when omitted

    [mcmc]                    # optional posterior-sampler overrides
    n_samples = 300

    [kmn]                     # optional density-network overrides
    n_centers = 25

    [baseline]                # optional, Random / Lhs methods only
    sizes = [10, 20, 30]      # dataset sizes at which the metric is taken

Unless overridden in ``[engine]``, ``n_initial`` and ``max_iterations``
follow the problem preset and the candidate grid is the problem's own.
The top-level ``seed`` always wins over a ``seed`` key inside ``[engine]``.
Worker parallelism is capped by the ``ACCBOED_THREADS`` environment
variable, defaulting to the logical core count.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .benchmarks.problems import (
    LHS_SCHEME,
    RANDOM_SCHEME,
    ProblemSpec,
    baseline_run,
    get_problem,
    list_problems,
)
from .engine import (
    AccBoedConfig,
    RunResult,
    acc_boed_run,
    build_cde_dataset,
    optimize_design,
    resolve_eps_cov,
    save_records_csv,
    save_summary_json,
    sweep_utilities,
    _fit_surrogate,
    _draw_poi,
    _sub_seed,
)
from .gp import Dataset
from .kmn import InsufficientData, KmnConfig, train_kmn
from .poi import McmcConfig, POSTERIOR_GIVEN_Y0
from .sampling import as_domain, lhs_sample

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_METHODS = {
    "accboed": "AccBoed",
    "acc": "AccBoed",
    "basicboed": "BasicBoed",
    "basic": "BasicBoed",
    "random": "Random",
    "lhs": "Lhs",
}


class ConfigError(Exception):
    """A configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved run: the problem instance plus every knob."""

    problem_name: str
    problem: ProblemSpec
    method: str
    output_dir: Path
    seed: int
    engine: AccBoedConfig
    mcmc: McmcConfig
    kmn: KmnConfig
    baseline_sizes: tuple


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

def _section(raw: dict, name: str) -> dict:
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(table)


def _build_dataclass(cls, table: dict, where: str):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - valid)
    if unknown:
        raise ConfigError(f"unknown [{where}] option(s): {', '.join(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{where}] configuration: {exc}") from exc


def load_run_config(path, require_method: bool = True) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Raises :class:`ConfigError` on any problem: unreadable or malformed
    file, unknown problem or method, bad option names or values.  When
    ``require_method`` is false a missing ``method`` defaults to AccBoed
    (used by ``bench-timing``, which times both estimators regardless).
    """
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc

    for key in ("problem", "output_dir") + (("method",) if require_method else ()):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    problem_name = raw["problem"]
    if not isinstance(problem_name, str):
        raise ConfigError("problem must be a string")
    method_raw = raw.get("method", "AccBoed")
    if not isinstance(method_raw, str) or method_raw.lower() not in _METHODS:
        choices = ", ".join(sorted(set(_METHODS.values())))
        raise ConfigError(f"unknown method {method_raw!r}; choose one of {choices}")
    method = _METHODS[method_raw.lower()]
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")

    problem_args = _section(raw, "problem_args")
    try:
        problem = get_problem(problem_name, **problem_args)
    except (KeyError, TypeError, ValueError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        raise ConfigError(str(message)) from exc

    engine_table = _section(raw, "engine")
    engine_table.setdefault("n_initial", problem.n_initial)
    engine_table.setdefault("max_iterations", problem.n_iterations)
    engine_table["seed"] = seed
    engine = _build_dataclass(AccBoedConfig, engine_table, "engine")

    mcmc_table = _section(raw, "mcmc")
    mcmc_table["seed"] = seed
    mcmc = _build_dataclass(McmcConfig, mcmc_table, "mcmc")

    kmn_table = _section(raw, "kmn")
    if "hidden_sizes" in kmn_table:
        kmn_table["hidden_sizes"] = tuple(kmn_table["hidden_sizes"])
    if "bandwidths" in kmn_table:
        kmn_table["bandwidths"] = tuple(kmn_table["bandwidths"])
    kmn = _build_dataclass(KmnConfig, kmn_table, "kmn")

    baseline_table = _section(raw, "baseline")
    unknown = sorted(set(baseline_table) - {"sizes"})
    if unknown:
        raise ConfigError(f"unknown [baseline] option(s): {', '.join(unknown)}")
    if "sizes" in baseline_table:
        sizes = baseline_table["sizes"]
        if (not isinstance(sizes, list) or not sizes
                or not all(isinstance(s, int) and not isinstance(s, bool) for s in sizes)):
            raise ConfigError("[baseline] sizes must be a non-empty list of integers")
        baseline_sizes = tuple(sizes)
    else:
        baseline_sizes = tuple(range(engine.n_initial,
                                     engine.n_initial + engine.max_iterations + 1))

    output_dir = Path(raw["output_dir"]) if isinstance(raw["output_dir"], str) else None
    if output_dir is None:
        raise ConfigError("output_dir must be a string path")
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output_dir {output_dir}: {exc}") from exc

    return RunConfig(problem_name=problem_name, problem=problem, method=method,
                     output_dir=output_dir, seed=seed, engine=engine, mcmc=mcmc,
                     kmn=kmn, baseline_sizes=baseline_sizes)


# ---------------------------------------------------------------------------
# Run execution and artifact writing
# ---------------------------------------------------------------------------

def _save_poi_csv(samples, path) -> None:
    points = np.atleast_2d(np.asarray(samples.points, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z_{i}" for i in range(points.shape[1])])
        for row in points:
            writer.writerow([repr(float(v)) for v in row])


def execute_run(cfg: RunConfig) -> RunResult:
    """Run the configured method and write all artifacts to the output dir.

    Design-loop methods (AccBoed, BasicBoed) run the sequential loop with
    the corresponding estimator; Random and Lhs replay the non-adaptive
    baseline at ``baseline_sizes``.  Artifacts: ``records.csv`` (one row per
    iteration or size), ``summary.json`` (final metric, error field,
    resolved configuration), and ``posterior_samples.csv`` for posterior
    problems solved by a design-loop method.
    """
    t_start = time.perf_counter()
    extra = {"method": cfg.method, "seed": cfg.seed, "config_problem": cfg.problem_name}
    if cfg.method in ("AccBoed", "BasicBoed"):
        estimator = "acc" if cfg.method == "AccBoed" else "basic"
        result = acc_boed_run(cfg.problem, cfg.engine, mcmc=cfg.mcmc,
                              kmn_config=cfg.kmn, estimator=estimator)
    else:
        scheme = RANDOM_SCHEME if cfg.method == "Random" else LHS_SCHEME
        try:
            records = baseline_run(cfg.problem, scheme, cfg.baseline_sizes,
                                   seed=cfg.seed, mcmc=cfg.mcmc,
                                   n_poi=cfg.engine.big_n_z)
            result = RunResult(records=records, gp=None, poi_samples=None, error=None)
        except Exception as exc:  # noqa: BLE001 - reported via summary.json
            result = RunResult(records=[], gp=None, poi_samples=None,
                               error=f"baseline: {exc}")
        extra["baseline_sizes"] = list(cfg.baseline_sizes)

    extra["wall_time_s"] = time.perf_counter() - t_start
    if result.records:
        save_records_csv(result.records, cfg.output_dir / "records.csv")
    if (result.poi_samples is not None
            and cfg.problem.poi_kind.variant == POSTERIOR_GIVEN_Y0):
        _save_poi_csv(result.poi_samples, cfg.output_dir / "posterior_samples.csv")
        extra["poi_acceptance_rate"] = result.poi_samples.acceptance_rate
    save_summary_json(result, cfg.problem_name, cfg.engine,
                      cfg.output_dir / "summary.json", extra=extra)
    return result


def _write_error_summary(config_file, message: str) -> None:
    """Best effort: leave a machine-readable error next to the run outputs."""
    try:
        raw = tomllib.loads(Path(config_file).read_text())
        out = raw.get("output_dir")
        if not isinstance(out, str):
            return
        directory = Path(out)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {"error": message, "config_file": str(config_file)}
        with open(directory / "summary.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except Exception:  # noqa: BLE001 - never mask the original failure
        pass


def cmd_run(config_file) -> int:
    """Execute one configuration; exit 0/1/2 per the module contract."""
    try:
        cfg = load_run_config(config_file)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error_summary(config_file, str(exc))
        return EXIT_CONFIG
    result = execute_run(cfg)
    if result.error is not None:
        print(f"error: {result.error}", file=sys.stderr)
        return EXIT_RUNTIME
    last = result.records[-1]
    print(f"{cfg.problem_name} [{cfg.method}] seed={cfg.seed}: "
          f"{last.metric_name}={last.metric_value:.6g} "
          f"at {last.dataset_size} points -> {cfg.output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def cmd_compare(config_files, report_path) -> int:
    """Run several configs of one problem and join the final metrics.

    Writes ``report_path`` (CSV: method, final metric, relative error
    against the problem's registered ground truth, wall time) and a
    companion ``<report>_timing.csv`` listing per-method seconds with a
    reference-over-accelerated ratio row when both loop methods are present.
    """
    report_path = Path(report_path)
    try:
        configs = [load_run_config(p) for p in config_files]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    names = {cfg.problem_name for cfg in configs}
    if len(names) != 1:
        print(f"error: compare needs one problem, got {sorted(names)}", file=sys.stderr)
        return EXIT_CONFIG
    truth = configs[0].problem.ground_truth
    if truth is None:
        print(f"error: problem {configs[0].problem_name!r} has no registered "
              "ground truth to compare against", file=sys.stderr)
        return EXIT_CONFIG

    rows = []
    for cfg in configs:
        t0 = time.perf_counter()
        result = execute_run(cfg)
        wall = time.perf_counter() - t0
        if result.error is not None:
            print(f"error: {cfg.method} run failed: {result.error}", file=sys.stderr)
            return EXIT_RUNTIME
        last = result.records[-1]
        rows.append({
            "method": cfg.method,
            "problem": cfg.problem_name,
            "seed": cfg.seed,
            "dataset_size": last.dataset_size,
            "metric_name": last.metric_name,
            "final_metric": last.metric_value,
            "ground_truth": truth,
            "relative_error": abs(last.metric_value - truth) / abs(truth),
            "wall_time_s": wall,
        })

    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    timing_path = report_path.with_name(report_path.stem + "_timing" + report_path.suffix)
    seconds = {row["method"]: row["wall_time_s"] for row in rows}
    with open(timing_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "seconds"])
        for row in rows:
            writer.writerow([row["method"], repr(row["wall_time_s"])])
        if "AccBoed" in seconds and "BasicBoed" in seconds:
            writer.writerow(["Ratio (Basic/Acc)",
                             repr(seconds["BasicBoed"] / seconds["AccBoed"])])

    for row in rows:
        print(f"{row['method']:>9}: {row['metric_name']}={row['final_metric']:.6g} "
              f"rel_err={row['relative_error']:.4f} ({row['wall_time_s']:.1f}s)")
    print(f"report -> {report_path}, timing -> {timing_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench-timing
# ---------------------------------------------------------------------------

def cmd_bench_timing(config_file) -> int:
    """Time one design-selection iteration, accelerated vs. reference.

    Replays the loop's first iteration on frozen state: initial design,
    surrogate fit, and candidate pool are shared; then the accelerated path
    (training-set construction, density-network training, candidate sweep)
    and the reference path (candidate sweep alone) are timed back to back.
    Writes ``bench_timing.json`` into the output directory.  The chosen
    candidate of each path is recorded, so reruns with one seed must agree
    on everything but the timings.
    """
    try:
        cfg = load_run_config(config_file, require_method=False)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error_summary(config_file, str(exc))
        return EXIT_CONFIG

    problem, config = cfg.problem, cfg.engine
    try:
        domain = as_domain(problem.domain)
        candidates = config.candidate_grid
        if candidates is None:
            candidates = problem.candidate_grid()

        inputs = lhs_sample(config.n_initial, domain, seed=_sub_seed(config.seed, 1))
        sim_rng = np.random.default_rng([config.seed, 2])
        outputs = np.array([problem.simulate(x, sim_rng) for x in inputs])
        gp = _fit_surrogate(problem, Dataset(inputs, outputs), refit=True)
        pool = _draw_poi(problem, gp, cfg.mcmc, config.big_n_z,
                         _sub_seed(config.seed, 3, 1))

        t0 = time.perf_counter()
        cde_rng = np.random.default_rng([config.seed, 4, 1])
        min_records = 10 * cfg.kmn.n_centers
        try:
            cde = build_cde_dataset(gp, pool.points, candidates, config,
                                    cde_rng, min_records)
        except InsufficientData:
            relaxed = dataclasses.replace(
                config, eps_cov=0.1 * resolve_eps_cov(config, gp, pool.points))
            cde = build_cde_dataset(gp, pool.points, candidates, relaxed,
                                    cde_rng, min_records)
        t_dataset = time.perf_counter() - t0

        t0 = time.perf_counter()
        kmn = train_kmn(cde, dataclasses.replace(
            cfg.kmn, seed=_sub_seed(config.seed, 5, 1)))
        t_train = time.perf_counter() - t0

        t0 = time.perf_counter()
        acc_estimates = sweep_utilities(candidates, gp, pool.points, config, 1,
                                        kmn=kmn, estimator="acc")
        acc_choice = optimize_design(acc_estimates)
        t_acc_sweep = time.perf_counter() - t0

        t0 = time.perf_counter()
        basic_estimates = sweep_utilities(candidates, gp, pool.points, config, 1,
                                          estimator="basic")
        basic_choice = optimize_design(basic_estimates)
        t_basic = time.perf_counter() - t0
    except Exception as exc:  # noqa: BLE001 - reported via stderr and exit 1
        print(f"error: bench-timing failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    acc_total = t_dataset + t_train + t_acc_sweep
    payload = {
        "problem": cfg.problem_name,
        "seed": cfg.seed,
        "n_train": int(config.n_initial),
        "n_candidates": int(len(candidates)),
        "acc": {
            "dataset_s": t_dataset,
            "train_s": t_train,
            "sweep_s": t_acc_sweep,
            "total_s": acc_total,
            "chosen_index": int(acc_choice.index),
            "utility": float(acc_choice.value),
        },
        "basic": {
            "sweep_s": t_basic,
            "total_s": t_basic,
            "chosen_index": int(basic_choice.index),
            "utility": float(basic_choice.value),
        },
        "ratio_basic_over_acc": t_basic / acc_total,
        "sweep_ratio_basic_over_acc": t_basic / t_acc_sweep,
    }
    out_path = cfg.output_dir / "bench_timing.json"
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{cfg.problem_name}: acc {acc_total:.2f}s vs basic {t_basic:.2f}s "
          f"-> ratio {payload['ratio_basic_over_acc']:.2f} ({out_path})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accboed",
        description="Sequential experimental-design runs, comparisons, and timing benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("config", help="TOML run configuration")

    p_cmp = sub.add_parser("compare", help="run several configs of one problem and join results")
    p_cmp.add_argument("configs", nargs="+", help="TOML run configurations")
    p_cmp.add_argument("--report", required=True, help="comparison CSV output path")

    p_bench = sub.add_parser("bench-timing",
                             help="time one iteration, accelerated vs reference estimator")
    p_bench.add_argument("config", help="TOML run configuration")

    sub.add_parser("list-problems", help="print registered problem names")
    return parser


def main(argv=None) -> int:
    """Entry point returning the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, matching the configuration-error code.
        return int(exc.code or 0)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "compare":
        return cmd_compare(args.configs, args.report)
    if args.command == "bench-timing":
        return cmd_bench_timing(args.config)
    for name in list_problems():
        print(name)
    return EXIT_OK


def entry_point() -> None:
    raise SystemExit(main())
