"""
pycorv.experiments - Experiment runners behind the CLI

Each experiment kind writes summary.csv (deterministic columns only), detail
CSVs that may carry wall times, optional SVGs and a manifest into the
configured output directory.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from .config import ExperimentConfig, SamplerSection
from .diagnostics import (
    histogram_vs_density, ito_instability_scan, ks_against_exact, steps_to_horizon,
    weak_error_experiment,
)
from .errors import ComputationError, ConfigError, DivergenceError, NumericalOverflowError
from .nmf import (
    FactorState, RatingsDataset, generate_synthetic, init_factors, iterations_to_reach,
    load_factors, load_ratings_csv, nmf_step_corv, nmf_step_mirror, sample_minibatch,
    save_factors, train_nmf,
)
from .nmf.dataset import Split
from .reports import file_label, rows_from, write_csv, write_manifest
from .rng import chain_stream
from .samplers import SampleTrace, SamplerSpec, run_chain, run_chains_parallel
from .svg import histogram_svg, loglog_svg
from .targets import TargetDensity
from .transforms import POSITIVE_REALS, resolve_transform

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    kind: str
    out_dir: Path
    files: List[Path] = field(default_factory=list)
    summary: List[Dict[str, Any]] = field(default_factory=list)


def _summary(result: ExperimentResult, header: List[str]) -> None:
    result.files.append(write_csv(result.out_dir / "summary.csv", header,
                                  rows_from(result.summary, header)))


def _svg(result: ExperimentResult, name: str, text: str) -> None:
    path = result.out_dir / name
    path.write_text(text, encoding="utf-8")
    result.files.append(path)


def _transform_name(spec: SamplerSpec) -> str:
    return spec.transform.name if spec.transform is not None else ""


# -- density recovery ---------------------------------------------------------

def _density_spec(spec: SamplerSpec, n_samples: int):
    """Spec and step count that keep exactly n_samples after burn-in."""
    kept_steps = n_samples * spec.thinning
    burn_in = kept_steps // 10 if spec.burn_in is None else spec.burn_in
    return replace(spec, burn_in=burn_in), burn_in + kept_steps


def run_density(config: ExperimentConfig, result: ExperimentResult) -> None:
    target = config.build_target()
    oracle = config.build_oracle(target)
    section = config.density
    specs, n_steps = [], None
    for s in config.samplers:
        spec, n = _density_spec(config.build_sampler(s, target), section.n_samples)
        specs.append(spec)
        n_steps = n if n_steps is None else n_steps
        if n != n_steps:
            raise ConfigError("invalid density experiment",
                              ["samplers: burn_in and thinning must match across samplers"])
    seeds = [config.seed + i for i in range(len(specs))]
    logger.info(f"density recovery on {target}: {len(specs)} sampler(s), {n_steps} steps each")
    traces = run_chains_parallel(specs, target, oracle, n_steps, seeds, workers=config.threads,
                                 initial_phi=section.initial_phi, keep_failures=True)

    chain_rows = []
    for spec, seed, outcome in zip(specs, seeds, traces):
        status = "ok"
        trace = outcome
        if not isinstance(outcome, SampleTrace):
            if not isinstance(outcome, DivergenceError):
                raise outcome
            status = f"diverged at step {outcome.step_index}"
            trace = outcome.partial_trace
        row = {"method": spec.kind.value, "transform": _transform_name(spec),
               "stepsize": spec.stepsize, "n_samples": len(trace), "status": status,
               "boundary_events": trace.n_boundary_events,
               "tv_distance": math.nan, "boundary_mass_error": math.nan, "ks_statistic": math.nan}
        if len(trace):
            report = histogram_vs_density(trace, target, section.n_bins)
            row.update(tv_distance=report.tv_distance, boundary_mass_error=report.boundary_mass_error,
                       ks_statistic=ks_against_exact(trace, target, seed=config.seed))
            name = file_label(spec.label)
            result.files.append(write_csv(
                result.out_dir / f"hist_{name}.csv",
                ["bin_lo", "bin_hi", "count", "empirical_mass", "exact_mass"],
                zip(report.bin_edges[:-1], report.bin_edges[1:], report.counts,
                    report.empirical_masses, report.exact_masses)))
            _svg(result, f"hist_{name}.svg",
                 histogram_svg(report.bin_edges, report.empirical_masses, report.exact_masses,
                               f"{spec.label} on {target}"))
        logger.info(f"{spec.label}: TV {row['tv_distance']:.4f}, "
                    f"boundary error {row['boundary_mass_error']:.4f} ({status})")
        result.summary.append(row)
        chain_rows.append([spec.kind.value, _transform_name(spec), seed, len(trace), status,
                           trace.wall_time])

    result.files.append(write_csv(result.out_dir / "chains.csv",
                                  ["method", "transform", "seed", "n_samples", "status", "wall_time"],
                                  chain_rows))
    _summary(result, ["method", "transform", "stepsize", "n_samples", "status", "boundary_events",
                      "tv_distance", "boundary_mass_error", "ks_statistic"])


# -- weak error -----------------------------------------------------------------

def run_weak_error(config: ExperimentConfig, result: ExperimentResult) -> None:
    target = config.build_target()
    oracle = config.build_oracle(target)
    section = config.weak_error
    detail_rows, curve_rows, series = [], [], {}
    for s in config.samplers:
        spec = config.build_sampler(s, target)
        report = weak_error_experiment(
            spec, target, oracle, T=section.horizon, stepsizes=section.stepsizes,
            n_replicates=section.n_replicates, h=section.test_function, seed=config.seed,
            workers=config.threads, initial_phi=section.initial_phi, estimator=section.estimator,
            refine=section.refine, require_powered=section.require_powered)
        method, transform = spec.kind.value, _transform_name(spec)
        fitted, fitted_se = report.fitted_values
        for k, (eps, err, se, div, values, times) in enumerate(zip(
                report.stepsizes, report.errors, report.std_errors, report.divergences,
                report.replicate_values, report.wall_times)):
            curve_rows.append([method, transform, eps, steps_to_horizon(report.horizon, eps),
                               err, se, fitted[k], fitted_se[k], len(values), int(div),
                               eps in report.underpowered])
            for j, (value, wall) in enumerate(zip(values, times)):
                detail_rows.append([method, transform, eps, j, value, abs(value - report.truth), wall])
        series[spec.label] = (report.stepsizes, fitted)
        result.summary.append({
            "method": method, "transform": transform, "estimator": report.estimator,
            "fitted_slope": report.fitted_slope,
            "n_replicates": report.n_replicates, "test_function": report.test_function,
            "horizon": report.horizon, "truth": report.truth,
            "divergences": int(report.divergences.sum()), "underpowered": len(report.underpowered),
        })
        logger.info(f"{spec.label}: fitted slope {report.fitted_slope:.3f}")

    result.files.append(write_csv(
        result.out_dir / "weak_error.csv",
        ["method", "transform", "stepsize", "n_steps", "error", "std_error", "fitted_value",
         "fitted_std_error", "n_finished", "divergences", "underpowered"], curve_rows))
    result.files.append(write_csv(
        result.out_dir / "replicates.csv",
        ["method", "transform", "stepsize", "replicate", "h_value", "abs_error", "wall_time"],
        detail_rows))
    label = "expectation error" if section.estimator == "direct" else "change in expectation"
    _svg(result, "weak_error.svg", loglog_svg(series, f"{label} on {target}"))
    _summary(result, ["method", "transform", "estimator", "fitted_slope", "n_replicates",
                      "test_function", "horizon", "truth", "divergences", "underpowered"])


# -- Ito instability --------------------------------------------------------------

def run_instability(config: ExperimentConfig, result: ExperimentResult) -> None:
    target = config.build_target()
    section = config.instability
    with_transform = [s for s in config.samplers if s.transform]
    if not with_transform:
        raise ConfigError("invalid instability scan", ["samplers: need a sampler with a transform"])
    transform = resolve_transform(with_transform[0].transform, target.domain)
    rows = ito_instability_scan(target, transform, section.thetas, section.stepsize,
                                 section.n_draws, seed=config.seed)
    for r in rows:
        result.summary.append({"theta": r.theta, "transform": transform.name,
                               "ito_median_jump": r.ito_median_jump,
                               "corv_median_jump": r.corv_median_jump,
                               "corv_drift": r.corv_drift, "ito_diverged": r.ito_diverged})
    thetas = [r.theta for r in rows]
    _svg(result, "instability.svg", loglog_svg(
        {"ito": (thetas, [r.ito_median_jump for r in rows]),
         "corv": (thetas, [r.corv_median_jump for r in rows])},
        f"one-step proxy displacement, {transform.name}", x_label="theta", y_label="median |dphi|"))
    _summary(result, ["theta", "transform", "ito_median_jump", "corv_median_jump", "corv_drift",
                      "ito_diverged"])


# -- NMF ----------------------------------------------------------------------------

def load_nmf_dataset(config: ExperimentConfig) -> RatingsDataset:
    n = config.nmf
    if n.dataset == "synthetic":
        return generate_synthetic(n.n_users, n.n_items, n.true_rank, rate=n.rate_w,
                                  seed=config.seed, density=n.density)
    return load_ratings_csv(n.dataset, n.format, seed=config.seed)


def _resume_state(config: ExperimentConfig, name: str) -> Optional[FactorState]:
    if config.nmf.resume is None:
        return None
    path = Path(f"{config.nmf.resume}.{name}.bin")
    if not path.is_file():
        raise ConfigError(f"nmf.resume: snapshot {path} not found")
    logger.info(f"resuming {name} from {path}")
    return load_factors(path)


def train_one(config: ExperimentConfig, dataset: RatingsDataset, s: SamplerSection,
              stepsize: Optional[float] = None):
    n = config.nmf
    spec = config.build_sampler(s, stepsize=stepsize)
    return train_nmf(dataset, spec, n.rank, n.rate_w, n.rate_h, n.batch_size, n.n_iters,
                     seed=config.seed, eval_interval=n.eval_interval, burn_in=n.burn_in,
                     initial=_resume_state(config, file_label(spec.label)) if stepsize is None else None)


def run_nmf(config: ExperimentConfig, result: ExperimentResult) -> None:
    dataset = load_nmf_dataset(config)
    floor = dataset.noise_floor(Split.TEST)
    series = {}
    for s in config.samplers:
        trained = train_one(config, dataset, s)
        name = file_label(trained.label)
        result.files.append(write_csv(
            result.out_dir / f"rmse_{name}.csv",
            ["iteration", "train_rmse", "valid_rmse", "test_rmse", "wall_time"],
            [[p.iteration, p.train_rmse, p.valid_rmse, p.test_rmse, p.wall_time] for p in trained.curve]))
        snapshot = result.out_dir / f"factors.{name}.bin"
        save_factors(trained.state, snapshot)
        result.files.append(snapshot)
        last = trained.curve[-1]
        reach = None if floor is None else iterations_to_reach(trained.curve, 1.1 * floor)
        result.summary.append({
            "method": s.kind, "transform": s.transform or "", "stepsize": s.stepsize,
            "train_rmse": last.train_rmse, "valid_rmse": last.valid_rmse, "test_rmse": last.test_rmse,
            "noise_floor": floor, "iterations_to_floor": reach,
        })
        series[trained.label] = ([p.iteration for p in trained.curve], [p.test_rmse for p in trained.curve])
    _svg(result, "rmse.svg", loglog_svg(series, "test RMSE", x_label="iteration", y_label="RMSE"))
    _summary(result, ["method", "transform", "stepsize", "train_rmse", "valid_rmse", "test_rmse",
                      "noise_floor", "iterations_to_floor"])


# -- overhead benchmark -----------------------------------------------------------

def _time_steps(step: Callable, state: FactorState, batches, repeats: int) -> float:
    """Best-of-repeats mean seconds per step."""
    best = math.inf
    for _ in range(repeats):
        current = state
        started = time.perf_counter()
        for batch in batches:
            current = step(current, batch)
        best = min(best, (time.perf_counter() - started) / len(batches))
    return best


def benchmark_overhead(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Per-step NMF wall time of mirror and each CoRV transform, with overhead vs mirror."""
    n, b = config.nmf, config.bench
    dataset = generate_synthetic(n.n_users, n.n_items, n.true_rank, rate=n.rate_w,
                                 seed=config.seed, density=n.density)
    train = dataset.entries(Split.TRAIN)
    eps = config.samplers[0].stepsize if config.samplers else 1e-4
    table = []
    for size in b.batch_sizes:
        if size > len(train):
            raise ConfigError(f"bench.batch_sizes: {size} exceeds the {len(train)} training entries")
        rng = chain_stream(config.seed)
        batches = [sample_minibatch(train, size, rng) for _ in range(b.n_steps)]
        base = init_factors(dataset.n_users, dataset.n_items, b.rank, chain_stream(config.seed),
                            n.rate_w, n.rate_h)
        step_rng = chain_stream(config.seed + 1)
        mirror = _time_steps(lambda st, batch: nmf_step_mirror(st, batch, eps, step_rng),
                             base, batches, b.repeats)
        table.append({"batch_size": size, "method": "mirror_sgld", "transform": "",
                      "seconds_per_step": mirror, "relative_overhead": 0.0})
        for name in b.transforms:
            t = resolve_transform(name, POSITIVE_REALS)
            state = init_factors(dataset.n_users, dataset.n_items, b.rank, chain_stream(config.seed),
                                 n.rate_w, n.rate_h, transform=t)
            seconds = _time_steps(lambda st, batch: nmf_step_corv(st, batch, eps, t, step_rng),
                                  state, batches, b.repeats)
            table.append({"batch_size": size, "method": "corv_sgld", "transform": name,
                          "seconds_per_step": seconds, "relative_overhead": seconds / mirror - 1.0})
            logger.info(f"|S|={size} corv[{name}]: {100 * (seconds / mirror - 1.0):+.1f}% vs mirror")
    return table


def run_benchmark(config: ExperimentConfig, result: ExperimentResult) -> None:
    table = benchmark_overhead(config)
    header = ["batch_size", "method", "transform", "seconds_per_step", "relative_overhead"]
    result.files.append(write_csv(result.out_dir / "timings.csv", header,
                                  [[row[k] for k in header] for row in table]))
    result.summary = [{k: row[k] for k in ("batch_size", "method", "transform")} for row in table]
    _summary(result, ["batch_size", "method", "transform"])


# -- grid search --------------------------------------------------------------------

@dataclass
class GridSearchResult:
    best_stepsize: float
    best_objective: float
    table: List[Dict[str, Any]]
    endpoint: bool


def _tv_objective(config: ExperimentConfig, target: TargetDensity, eps: float) -> float:
    spec = config.build_sampler(config.samplers[0], target, stepsize=eps)
    spec, n_steps = _density_spec(spec, config.density.n_samples)
    trace = run_chain(spec, target, config.build_oracle(target), n_steps, config.seed,
                      initial_phi=config.density.initial_phi)
    return histogram_vs_density(trace, target, config.density.n_bins).tv_distance


def grid_search_stepsize(config: ExperimentConfig, stepsizes=None, objective: Optional[str] = None) -> GridSearchResult:
    """Evaluate every candidate stepsize with the config seed; ties go to the smaller one."""
    candidates = sorted(float(e) for e in (stepsizes if stepsizes is not None else config.grid.stepsizes))
    objective = objective or config.grid.objective
    if not candidates:
        raise ConfigError("invalid grid search", ["grid.stepsizes: need at least one candidate"])
    if objective == "tv_distance" and config.kind == "nmf_train":
        raise ConfigError("invalid grid search", ["grid.objective: tv_distance needs a density experiment"])
    if objective == "validation_rmse" and config.kind != "nmf_train":
        raise ConfigError("invalid grid search", ["grid.objective: validation_rmse needs an nmf_train experiment"])

    if objective == "tv_distance":
        target = config.build_target()
        evaluate = lambda eps: _tv_objective(config, target, eps)
    else:
        dataset = load_nmf_dataset(config)
        evaluate = lambda eps: train_one(config, dataset, config.samplers[0], stepsize=eps).curve[-1].valid_rmse

    table = []
    for eps in candidates:
        try:
            value, status = evaluate(eps), "ok"
        except (DivergenceError, NumericalOverflowError) as err:
            value, status = math.inf, f"diverged: {str(err).splitlines()[0]}"
            logger.warning(f"grid search: stepsize {eps:g} diverged")
        if not math.isfinite(value) and status == "ok":
            status = "diverged: non-finite objective"
        table.append({"stepsize": eps, "objective": value, "status": status})
        logger.info(f"grid search: stepsize {eps:g} -> {objective} {value:.5g}")

    finite = [row for row in table if math.isfinite(row["objective"])]
    if not finite:
        details = "; ".join(f"{row['stepsize']:g}: {row['status']}" for row in table)
        raise ComputationError(f"every candidate stepsize diverged ({details})")
    best = min(finite, key=lambda row: row["objective"])
    index = table.index(best)
    endpoint = len(table) >= 3 and index in (0, len(table) - 1)
    if endpoint:
        logger.warning(f"grid search: best stepsize {best['stepsize']:g} is at the edge of the grid; "
                       f"widen the grid")
    return GridSearchResult(best["stepsize"], best["objective"], table, endpoint)


def run_grid_search(config: ExperimentConfig, result: ExperimentResult) -> None:
    search = grid_search_stepsize(config)
    result.files.append(write_csv(result.out_dir / "grid.csv", ["stepsize", "objective", "status"],
                                  [[r["stepsize"], r["objective"], r["status"]] for r in search.table]))
    result.summary.append({"objective": config.grid.objective, "best_stepsize": search.best_stepsize,
                           "best_objective": search.best_objective, "endpoint": search.endpoint})
    _summary(result, ["objective", "best_stepsize", "best_objective", "endpoint"])


_RUNNERS: Dict[str, Callable[[ExperimentConfig, ExperimentResult], None]] = {
    "density": run_density,
    "weak_error": run_weak_error,
    "instability": run_instability,
    "nmf_train": run_nmf,
    "benchmark_overhead": run_benchmark,
}


def _prepare(config: ExperimentConfig) -> ExperimentResult:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return ExperimentResult(config.kind, out_dir)


def _finish(config: ExperimentConfig, result: ExperimentResult, started: float) -> ExperimentResult:
    result.files.append(write_manifest(result.out_dir, config, result.files))
    logger.info(f"{config.kind} finished in {time.perf_counter() - started:.1f}s; "
                f"{len(result.files)} file(s) in {result.out_dir}")
    return result


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the config's experiment kind and write its reports."""
    started = time.perf_counter()
    result = _prepare(config)
    logger.info(f"running {config.kind} (seed {config.seed}, {config.threads} worker(s))")
    _RUNNERS[config.kind](config, result)
    return _finish(config, result, started)


def run_grid(config: ExperimentConfig) -> ExperimentResult:
    started = time.perf_counter()
    result = _prepare(config)
    run_grid_search(config, result)
    return _finish(config, result, started)


def run_bench(config: ExperimentConfig) -> ExperimentResult:
    started = time.perf_counter()
    result = _prepare(config)
    run_benchmark(config, result)
    return _finish(config, result, started)
