"""
Long-running statistical reproductions, deselected by default (`pytest -m slow`).
"""

from pathlib import Path

import numpy as np
import pytest

from pycorv.config import ExperimentConfig
from pycorv.diagnostics import histogram_vs_density, ks_against_exact, weak_error_experiment
from pycorv.errors import DivergenceError, NumericalOverflowError
from pycorv.experiments import benchmark_overhead, run_experiment
from pycorv.nmf import Split, generate_synthetic, iterations_to_reach, train_nmf
from pycorv.rng import chain_stream
from pycorv.samplers import ChainRunner, ConstantStepsize, SamplerSpec
from pycorv.targets import BetaTarget, GammaTarget, GradientOracle, TruncatedNormalTarget
from pycorv.transforms import POSITIVE_REALS, resolve_transform

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def ensemble_thetas(spec, target, n_chains, burn_in, n_keep, thinning, seed):
    """Pooled kept samples of `n_chains` replicate chains advanced as one vector."""
    runner = ChainRunner(spec, target, GradientOracle(target))
    state = runner.initial_state(chain_stream(seed), replicates=n_chains)
    for _ in range(burn_in):
        state = runner.step(state)
    kept = []
    for _ in range(n_keep):
        for _ in range(thinning):
            state = runner.step(state)
        kept.append(np.array(state.theta, copy=True))
    return np.concatenate(kept)


class TestStationaryRecovery:
    """CoRV samples against inverse-cdf draws."""

    def test_truncated_normal_ks(self):
        target = TruncatedNormalTarget(-1.0, 1.0)
        t = resolve_transform("sigmoid", target.domain)
        spec = SamplerSpec("corv_sgld", ConstantStepsize(1e-3), t, thinning=10)
        thetas = ensemble_thetas(spec, target, n_chains=10_000, burn_in=15_000, n_keep=5,
                                 thinning=10, seed=11)
        assert thetas.size == 50_000
        assert ks_against_exact(thetas, target, seed=12) < 0.02

    def test_arcsine_density_at_a_mixing_stepsize(self):
        """beta(0.5, 0.5) under sigmoid relaxes over tens of time units."""
        target = BetaTarget(0.5, 0.5)
        spec = SamplerSpec("corv_sgld", ConstantStepsize(0.03), resolve_transform("sigmoid", target.domain))
        thetas = ensemble_thetas(spec, target, n_chains=2000, burn_in=2000, n_keep=50,
                                 thinning=20, seed=5)
        assert histogram_vs_density(thetas, target, 50).tv_distance < 0.1


class TestMethodOrdering:
    """The gamma(0.5, 1) density preset: mirror vs CoRV."""

    def test_corv_beats_mirror_at_the_boundary(self, tmp_path):
        config = ExperimentConfig.from_file(CONFIGS / "density_gamma.toml")
        config.out_dir = str(tmp_path)
        result = run_experiment(config)
        rows = {row["method"]: row for row in result.summary}
        corv, mirror = rows["corv_sgld"], rows["mirror_sgld"]
        assert corv["n_samples"] == 100_000
        assert corv["status"] == "ok"
        assert corv["tv_distance"] <= mirror["tv_distance"]
        assert mirror["boundary_mass_error"] > 2.0 * corv["boundary_mass_error"]


class TestWeakErrorOrder:
    """CoRV + softplus on gamma(0.5, 0.5): first-order weak error."""

    def test_fitted_slope(self):
        target = GammaTarget(0.5, 0.5)
        spec = SamplerSpec("corv_sgld", ConstantStepsize(0.01),
                           resolve_transform("softplus", target.domain))
        report = weak_error_experiment(
            spec, target, GradientOracle(target), T=10.0,
            stepsizes=[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], n_replicates=4000, seed=7,
            estimator="coupled", refine=4)
        assert len(report.underpowered) <= 1
        assert 0.5 <= report.fitted_slope <= 1.5
        values, _ = report.fitted_values
        assert np.sum(np.diff(values) <= 0.0) >= 3


def _best_run(dataset, kind, name, seed):
    """The candidate stepsize with the lowest final validation RMSE; diverged runs drop out."""
    transform = resolve_transform(name, POSITIVE_REALS) if name else None
    best = None
    for eps in (3e-2, 1e-2, 3e-3, 1e-3):
        spec = SamplerSpec(kind, ConstantStepsize(eps), transform)
        try:
            run = train_nmf(dataset, spec, rank=5, batch_size=2000, n_iters=5000, seed=seed,
                            eval_interval=100)
        except (DivergenceError, NumericalOverflowError):
            continue
        if best is None or run.curve[-1].valid_rmse < best.curve[-1].valid_rmse:
            best = run
    assert best is not None
    return best


class TestSyntheticNMF:
    """200 x 100 Poisson NMF with five true factors."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_corv_softplus_reaches_the_noise_floor_first(self, seed):
        dataset = generate_synthetic(200, 100, 5, seed=seed, density=1.0)
        floor = dataset.noise_floor(Split.TEST)
        corv = _best_run(dataset, "corv_sgld", "softplus", seed)
        mirror = _best_run(dataset, "mirror_sgld", None, seed)

        assert min(p.test_rmse for p in corv.curve) <= 1.1 * floor
        mirror_final = mirror.final_test_rmse
        corv_reach = iterations_to_reach(corv.curve, mirror_final)
        assert corv_reach is not None
        assert corv_reach < iterations_to_reach(mirror.curve, mirror_final)


class TestStepOverhead:
    """Per-step NMF cost of CoRV against mirror SGLD."""

    def test_cheap_transforms_stay_within_fifteen_percent(self):
        config = ExperimentConfig.from_file(CONFIGS / "benchmark.toml")
        config.bench.transforms = ["exp", "softplus"]
        config.bench.repeats = 5
        table = benchmark_overhead(config)
        overhead = {(row["batch_size"], row["transform"]): row["relative_overhead"]
                    for row in table if row["method"] == "corv_sgld"}
        assert overhead[(2000, "exp")] <= 0.15
        assert overhead[(4000, "exp")] <= 0.15
        assert overhead[(4000, "softplus")] <= 0.15
