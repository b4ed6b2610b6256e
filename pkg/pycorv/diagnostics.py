"""
pycorv.diagnostics - Density recovery and weak-error scaling

Histograms are compared against per-bin masses of the exact density obtained
by adaptive quadrature. Weak-error experiments run replicate chains to a
fixed time T for a grid of stepsizes and fit the log-log slope of the error.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from .errors import ComputationError, ConfigError, DivergenceError
from .rng import CoarseNormals, chain_stream, replicate_seeds, substream
from .samplers import (
    ChainRunner, ChainState, ConstantStepsize, SampleTrace, SamplerSpec, run_chains_parallel,
    step_corv, step_ito,
)
from .targets import GradientOracle, TargetDensity, proxy_potential_gradient
from .transforms import Transform

logger = logging.getLogger(__name__)

MIN_BINS = 10
UPPER_QUANTILE = 0.999


@dataclass
class HistogramReport:
    bin_edges: np.ndarray
    counts: np.ndarray
    exact_masses: np.ndarray
    tv_distance: float
    boundary_mass_error: float

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def empirical_masses(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def histogram_edges(target: TargetDensity, n_bins: int) -> np.ndarray:
    """Bins over the domain; an infinite side is cut at the 0.001/0.999 quantile."""
    dist = target.distribution
    domain = target.domain
    lower = domain.lower if domain.has_finite_lower else float(dist.ppf(1.0 - UPPER_QUANTILE))
    upper = domain.upper if domain.has_finite_upper else float(dist.ppf(UPPER_QUANTILE))
    return np.linspace(lower, upper, n_bins + 1)


def exact_bin_masses(target: TargetDensity, edges) -> np.ndarray:
    """Quadrature mass of the normalized pdf per bin, open tails folded into the end bins."""
    dist = target.distribution
    if dist is None:
        raise ConfigError(f"{target} has no normalized density")
    edges = np.asarray(edges, dtype=np.float64)
    masses = np.empty(len(edges) - 1)
    with warnings.catch_warnings():
        # integrable endpoint singularities (beta/gamma with shape < 1)
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            masses[i], _ = integrate.quad(dist.pdf, a, b, limit=200)
    domain = target.domain
    if edges[0] > domain.lower:
        masses[0] += float(dist.cdf(edges[0]))
    if edges[-1] < domain.upper:
        masses[-1] += float(dist.sf(edges[-1]))
    return masses


def histogram_vs_density(trace: SampleTrace, target: TargetDensity, n_bins: int = 50) -> HistogramReport:
    thetas = np.asarray(trace.thetas if isinstance(trace, SampleTrace) else trace, dtype=np.float64)
    if thetas.size == 0:
        raise ConfigError("cannot histogram an empty trace")
    if n_bins < MIN_BINS:
        raise ConfigError(f"n_bins must be >= {MIN_BINS}, got {n_bins}")
    if target.distribution is None:
        raise ConfigError(f"{target} has no normalized density to compare against")

    edges = histogram_edges(target, n_bins)
    counts, _ = np.histogram(np.clip(thetas, edges[0], edges[-1]), bins=edges)
    exact = exact_bin_masses(target, edges)
    empirical = counts / thetas.size
    tv = 0.5 * float(np.abs(empirical - exact).sum())

    boundary_error = 0.0
    domain = target.domain
    if domain.has_finite_lower:
        boundary_error += abs(float(empirical[:2].sum() - exact[:2].sum()))
    if domain.has_finite_upper:
        boundary_error += abs(float(empirical[-2:].sum() - exact[-2:].sum()))
    return HistogramReport(edges, counts, exact, tv, boundary_error)


def exact_samples(target: TargetDensity, n: int, seed: int) -> np.ndarray:
    """Inverse-cdf draws from the target."""
    if target.distribution is None:
        raise ConfigError(f"{target} has no inverse cdf")
    return target.distribution.ppf(substream(seed, "reference").uniform(size=n))


def ks_against_exact(trace: SampleTrace, target: TargetDensity, seed: int = 0,
                     n_exact: Optional[int] = None) -> float:
    """Two-sample KS statistic between the trace (or pooled samples) and as many exact draws."""
    samples = trace.thetas if isinstance(trace, SampleTrace) else trace
    thetas = np.asarray(samples, dtype=np.float64).ravel()
    if thetas.size == 0:
        raise ConfigError("cannot test an empty trace")
    reference = exact_samples(target, n_exact or thetas.size, seed)
    return float(stats.ks_2samp(thetas, reference).statistic)


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ComputationError(f"xs and ys must be 1-d of equal length, got {xs.shape} and {ys.shape}")
    if xs.size < 3:
        raise ComputationError(f"need at least 3 points for a slope, got {xs.size}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ComputationError("slope fit over non-finite values")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ComputationError("log-log fit needs strictly positive values")
    log_x = np.log(xs)
    if np.ptp(log_x) == 0.0:
        raise ComputationError("all xs are equal")
    slope, _ = np.polyfit(log_x, np.log(ys), 1)
    return float(slope)


def _second_moment(target: TargetDensity) -> float:
    return float(target.distribution.moment(2))


def _mean(target: TargetDensity) -> float:
    return target.exact_mean


# name -> (h, exact E[h(theta)] under the target)
TEST_FUNCTIONS: Dict[str, Tuple[Callable, Callable[[TargetDensity], Optional[float]]]] = {
    "identity": (lambda x: x, _mean),
    "square": (np.square, _second_moment),
}


WEAK_ERROR_ESTIMATORS = ("direct", "coupled")


@dataclass
class WeakErrorReport:
    label: str
    stepsizes: np.ndarray
    errors: np.ndarray
    std_errors: np.ndarray
    divergences: np.ndarray
    fitted_slope: float
    n_replicates: int
    test_function: str
    horizon: float
    truth: float
    underpowered: List[float] = field(default_factory=list)
    # per stepsize: h(theta_T) of every finished replicate
    replicate_values: List[np.ndarray] = field(default_factory=list, repr=False)
    wall_times: List[np.ndarray] = field(default_factory=list, repr=False)
    estimator: str = "direct"
    refine: int = 1
    # coupled only: |mean h(theta_T^eps) - h(theta_T^(eps/refine))| and its standard error
    increments: Optional[np.ndarray] = None
    increment_std_errors: Optional[np.ndarray] = None

    @property
    def fitted_values(self) -> Tuple[np.ndarray, np.ndarray]:
        """The series the slope is fitted on, with its standard errors."""
        if self.estimator == "coupled":
            return self.increments, self.increment_std_errors
        return self.errors, self.std_errors


def steps_to_horizon(horizon: float, stepsize: float) -> int:
    return max(1, math.ceil(horizon / stepsize - 1e-9))


def resolved_above_noise(values, std_errors) -> np.ndarray:
    """True where a Monte Carlo estimate is at least twice its standard error."""
    values = np.asarray(values, dtype=np.float64)
    std_errors = np.asarray(std_errors, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.isfinite(values) & np.isfinite(std_errors) & (std_errors < values / 2.0)


def _final_thetas(spec: SamplerSpec, target: TargetDensity, oracle: GradientOracle, stepsize: float,
                  n_steps: int, rng, n_replicates: int, initial_phi: float) -> np.ndarray:
    """theta after n_steps for n_replicates chains advanced together as one vector."""
    runner = ChainRunner(replace(spec, stepsize_schedule=ConstantStepsize(stepsize)), target,
                         oracle.bound_to(rng))
    state = runner.initial_state(rng, initial_phi, replicates=n_replicates)
    for _ in range(n_steps):
        state = runner.step(state)
    return np.asarray(state.theta, dtype=np.float64)


def coupled_final_values(spec: SamplerSpec, target: TargetDensity, oracle: GradientOracle,
                         stepsize: float, horizon: float, n_replicates: int, refine: int = 4,
                         seed: int = 0, initial_phi: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """theta_T at `stepsize` and at stepsize/refine, driven by the same Brownian path.

    Returns (coarse, fine), one entry per replicate. The difference of the two
    has a much smaller spread than either, so the change in E[h(theta_T)]
    between the two stepsizes is resolved with far fewer replicates than the
    error against the exact expectation.
    """
    if oracle.noisy:
        raise ConfigError("coupled chains need an exact gradient oracle")
    if refine < 2:
        raise ConfigError(f"refine must be >= 2, got {refine}")
    n_steps = steps_to_horizon(horizon, stepsize)
    coarse = _final_thetas(spec, target, oracle, stepsize, n_steps,
                           CoarseNormals(chain_stream(seed), refine), n_replicates, initial_phi)
    fine = _final_thetas(spec, target, oracle, stepsize / refine, n_steps * refine,
                         chain_stream(seed), n_replicates, initial_phi)
    return coarse, fine


def _mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def weak_error_experiment(spec: SamplerSpec, target: TargetDensity, oracle: GradientOracle,
                          T: float = 10.0, stepsizes: Sequence[float] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
                          n_replicates: int = 200, h: str = "identity", seed: int = 0,
                          workers: int = 1, initial_phi: float = 0.0, estimator: str = "direct",
                          refine: int = 4, require_powered: bool = False) -> WeakErrorReport:
    """|mean h(theta_T) - E[h]| per stepsize, over replicate chains started at f(initial_phi).

    With estimator="direct" every replicate is its own chain and seed, spread
    over `workers` processes, and the slope is fitted on the errors. With
    estimator="coupled" the replicates run as one vector on `seed` next to a
    twin run at stepsize/refine on the same Brownian path, and the slope is
    fitted on the change in mean between the two, which shrinks at the same
    rate as the error. A stepsize whose fitted value is not at least twice its
    standard error is under-powered; require_powered turns that into a
    ComputationError.
    """
    stepsizes = np.asarray(stepsizes, dtype=np.float64)
    problems = []
    if stepsizes.ndim != 1 or stepsizes.size == 0:
        problems.append("stepsizes: need a non-empty list")
    elif np.any(stepsizes <= 0.0) or np.any(np.diff(stepsizes) >= 0.0):
        problems.append("stepsizes: must be positive and strictly decreasing")
    if not T > 0.0:
        problems.append(f"T: must be > 0, got {T}")
    if n_replicates < 2:
        problems.append(f"n_replicates: must be >= 2, got {n_replicates}")
    if h not in TEST_FUNCTIONS:
        problems.append(f"h: unknown test function {h!r}; expected one of {', '.join(TEST_FUNCTIONS)}")
    if estimator not in WEAK_ERROR_ESTIMATORS:
        problems.append(f"estimator: expected one of {', '.join(WEAK_ERROR_ESTIMATORS)}, got {estimator!r}")
    elif estimator == "coupled":
        if refine < 2:
            problems.append(f"refine: must be >= 2, got {refine}")
        if oracle.noisy:
            problems.append("estimator: coupled chains need an exact gradient oracle")
    if problems:
        raise ConfigError("invalid weak-error experiment", problems)
    h_fn, truth_fn = TEST_FUNCTIONS[h]
    truth = truth_fn(target)
    if truth is None:
        raise ConfigError(f"{target} has no exact expectation for h={h}")

    seeds = replicate_seeds(seed, n_replicates)
    errors, std_errors, divergences = [], [], []
    increments, increment_std_errors = [], []
    values_per_eps, wall_times = [], []
    for eps in stepsizes:
        n_steps = steps_to_horizon(T, float(eps))
        logger.info(f"weak error {spec.label}: eps={eps:g}, {n_steps} steps x {n_replicates} chains "
                    f"({estimator})")
        if estimator == "coupled":
            started = time.perf_counter()
            try:
                coarse, fine = coupled_final_values(spec, target, oracle, float(eps), T, n_replicates,
                                                    refine, seed, initial_phi)
            except DivergenceError as err:
                logger.warning(f"weak error {spec.label}: eps={eps:g} coupled run diverged: {err}")
                coarse = fine = np.empty(0)
            elapsed = time.perf_counter() - started
            values = np.asarray(h_fn(coarse), dtype=np.float64)
            divergences.append(n_replicates - values.size)
            wall_times.append(np.full(values.size, elapsed / max(values.size, 1)))
            if values.size >= 2:
                diff, diff_se = _mean_and_se(values - np.asarray(h_fn(fine), dtype=np.float64))
                increments.append(abs(diff))
                increment_std_errors.append(diff_se)
            else:
                increments.append(math.nan)
                increment_std_errors.append(math.nan)
        else:
            # keep only theta_T
            eps_spec = replace(spec, stepsize_schedule=ConstantStepsize(float(eps)),
                               burn_in=n_steps - 1, thinning=1)
            results = run_chains_parallel(eps_spec, target, oracle, n_steps, seeds,
                                          workers=workers, initial_phi=initial_phi, keep_failures=True)
            finished = [r for r in results if isinstance(r, SampleTrace)]
            failed = [r for r in results if not isinstance(r, SampleTrace)]
            for err in failed:
                if not isinstance(err, DivergenceError):
                    raise err
            values = np.array([h_fn(r.final_theta) for r in finished], dtype=np.float64)
            divergences.append(len(failed))
            wall_times.append(np.array([r.wall_time for r in finished]))
        values_per_eps.append(values)
        if values.size < 2:
            logger.warning(f"weak error {spec.label}: eps={eps:g} has {values.size} finished replicates")
            errors.append(math.nan)
            std_errors.append(math.nan)
            continue
        mean, se = _mean_and_se(values)
        errors.append(abs(mean - truth))
        std_errors.append(se)

    report = WeakErrorReport(
        label=spec.label, stepsizes=stepsizes, errors=np.array(errors),
        std_errors=np.array(std_errors), divergences=np.array(divergences, dtype=np.int64),
        fitted_slope=math.nan, n_replicates=n_replicates, test_function=h, horizon=T, truth=truth,
        replicate_values=values_per_eps, wall_times=wall_times, estimator=estimator,
        refine=refine if estimator == "coupled" else 1,
        increments=np.array(increments) if estimator == "coupled" else None,
        increment_std_errors=np.array(increment_std_errors) if estimator == "coupled" else None,
    )
    fitted, fitted_se = report.fitted_values
    powered = resolved_above_noise(fitted, fitted_se)
    weak = np.isfinite(fitted) & ~powered
    report.underpowered = [float(eps) for eps in stepsizes[weak]]
    for eps, value, se in zip(stepsizes[weak], fitted[weak], fitted_se[weak]):
        logger.warning(f"weak error {spec.label}: eps={eps:g} under-powered "
                       f"(standard error {se:.3g} vs value {value:.3g})")
    if require_powered and report.underpowered:
        listed = ", ".join(f"{eps:g}" for eps in report.underpowered)
        raise ComputationError(f"weak error {spec.label}: Monte Carlo noise hides the error at "
                               f"stepsize(s) {listed}; raise n_replicates")
    if np.count_nonzero(powered) >= 3:
        report.fitted_slope = fit_loglog_slope(stepsizes[powered], fitted[powered])
    else:
        logger.warning(f"weak error {spec.label}: only {np.count_nonzero(powered)} stepsizes "
                       f"resolved above Monte Carlo noise, slope not fitted")
    return report


@dataclass(frozen=True)
class InstabilityRow:
    theta: float
    ito_median_jump: float
    corv_median_jump: float
    corv_drift: float
    ito_diverged: bool


def ito_instability_scan(target: TargetDensity, transform: Transform, thetas: Sequence[float],
                          stepsize: float = 1e-3, n_draws: int = 1000,
                          seed: int = 0) -> List[InstabilityRow]:
    """One Ito step and one CoRV step from each theta_t, n_draws noise draws each.

    Both samplers see the same eta draws. An Ito step that stays non-finite
    is reported as diverged with an infinite jump.
    """
    oracle = GradientOracle(target)
    rows = []
    for theta in thetas:
        phi = float(transform.inverse(float(theta)))
        phis = np.full(n_draws, phi)
        start_theta = np.full(n_draws, float(transform.eval(phi)))

        rng = chain_stream(seed)
        start = ChainState(phis, start_theta, 0, stepsize, rng)
        diverged = False
        try:
            ito = step_ito(start, oracle.bound_to(rng), transform)
            ito_jump = float(np.median(np.abs(ito.phi - phis)))
        except DivergenceError:
            diverged = True
            ito_jump = math.inf

        rng = chain_stream(seed)
        corv = step_corv(ChainState(phis, start_theta, 0, stepsize, rng), oracle.bound_to(rng), transform)
        corv_jump = float(np.median(np.abs(corv.phi - phis)))
        drift = stepsize * abs(float(proxy_potential_gradient(target, transform, phi)))
        rows.append(InstabilityRow(float(theta), ito_jump, corv_jump, drift, diverged))
        logger.debug(f"instability theta={theta:g}: ito {ito_jump:.3g}, corv {corv_jump:.3g}, drift {drift:.3g}")
    return rows
