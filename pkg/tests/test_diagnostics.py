"""
Tests for histogram, KS and weak-error diagnostics and the Ito instability scan.
"""

import math

import numpy as np
import pytest

from pycorv.diagnostics import (
    MIN_BINS, coupled_final_values, exact_bin_masses, exact_samples, fit_loglog_slope,
    histogram_edges, histogram_vs_density, ito_instability_scan, ks_against_exact,
    resolved_above_noise, steps_to_horizon, weak_error_experiment,
)
from pycorv.errors import ComputationError, ConfigError
from pycorv.rng import chain_stream
from pycorv.samplers import ConstantStepsize, SamplerSpec, run_chain
from pycorv.targets import (
    BetaTarget, GammaTarget, GradientOracle, NormalTarget, TruncatedNormalTarget,
)
from pycorv.transforms import make_transform


class TestLogLogSlope:
    """Least-squares slope in log-log space."""

    XS = np.logspace(-3, -1, 20)

    def test_linear(self):
        assert fit_loglog_slope(self.XS, 3.0 * self.XS) == pytest.approx(1.0, abs=1e-10)

    def test_quadratic(self):
        assert fit_loglog_slope(self.XS, 0.5 * self.XS ** 2) == pytest.approx(2.0, abs=1e-10)

    def test_noisy_linear(self):
        noise = 1.0 + 0.1 * chain_stream(0).standard_normal(self.XS.size)
        assert 0.9 <= fit_loglog_slope(self.XS, self.XS * noise) <= 1.1

    @pytest.mark.parametrize("xs,ys", [
        ([1.0, 2.0], [1.0, 2.0]),
        ([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]),
        ([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]),
        ([1.0, 2.0, 3.0], [1.0, -2.0, 3.0]),
        ([1.0, 2.0, 3.0], [1.0, math.nan, 3.0]),
        ([1.0, 2.0, 3.0], [1.0, 2.0]),
    ])
    def test_degenerate(self, xs, ys):
        with pytest.raises(ComputationError):
            fit_loglog_slope(xs, ys)


class TestHistogram:
    """Histogram against exact per-bin masses."""

    @pytest.mark.parametrize("target", [
        BetaTarget(0.5, 0.5), BetaTarget(2.0, 2.0), GammaTarget(0.5, 1.0),
        TruncatedNormalTarget(-1.0, 2.0), NormalTarget(),
    ])
    def test_masses_sum_to_one(self, target):
        masses = exact_bin_masses(target, histogram_edges(target, 50))
        assert masses.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.all(masses >= 0.0)

    def test_edges(self):
        edges = histogram_edges(BetaTarget(), 50)
        assert edges[0] == 0.0 and edges[-1] == 1.0 and edges.size == 51
        gamma = GammaTarget(0.5, 1.0)
        edges = histogram_edges(gamma, 20)
        assert edges[0] == 0.0
        assert edges[-1] == pytest.approx(gamma.distribution.ppf(0.999))

    def test_exact_samples_match(self):
        target = BetaTarget(2.0, 2.0)
        report = histogram_vs_density(exact_samples(target, 100_000, seed=1), target)
        assert report.tv_distance < 0.03
        assert report.boundary_mass_error < 0.01
        assert report.n_samples == 100_000

    def test_point_mass(self):
        target = BetaTarget(2.0, 2.0)
        report = histogram_vs_density(np.full(1000, 0.5), target)
        hit = int(np.argmax(report.counts))
        assert report.tv_distance == pytest.approx(1.0 - report.exact_masses[hit], abs=1e-6)

    def test_tail_samples_are_kept(self):
        target = GammaTarget(0.5, 1.0)
        report = histogram_vs_density(np.array([0.1, 0.5, 50.0, 1e6]), target, n_bins=MIN_BINS)
        assert report.n_samples == 4
        assert report.counts[-1] == 2

    def test_accepts_traces(self):
        target = BetaTarget(2.0, 2.0)
        spec = SamplerSpec("mirror_sgld", ConstantStepsize(1e-3))
        trace = run_chain(spec, target, GradientOracle(target), 500, seed=0)
        report = histogram_vs_density(trace, target, n_bins=20)
        assert report.n_samples == len(trace)

    def test_empty(self):
        with pytest.raises(ConfigError):
            histogram_vs_density(np.array([]), BetaTarget())

    def test_too_few_bins(self):
        with pytest.raises(ConfigError):
            histogram_vs_density(np.array([0.5]), BetaTarget(), n_bins=MIN_BINS - 1)


class TestKolmogorovSmirnov:
    """Two-sample KS against inverse-cdf draws."""

    def test_exact_draws_agree(self):
        target = TruncatedNormalTarget(-1.0, 1.0)
        trace = run_chain(SamplerSpec("mirror_sgld", ConstantStepsize(1e-2)), target,
                          GradientOracle(target), 20, seed=0)
        trace.thetas = exact_samples(target, 50_000, seed=5)
        assert ks_against_exact(trace, target, seed=6) < 0.02

    def test_wrong_distribution_disagrees(self):
        target = BetaTarget(2.0, 2.0)
        trace = run_chain(SamplerSpec("mirror_sgld", ConstantStepsize(1e-2)), target,
                          GradientOracle(target), 20, seed=0)
        trace.thetas = exact_samples(BetaTarget(0.5, 0.5), 20_000, seed=5)
        assert ks_against_exact(trace, target) > 0.05


class TestWeakError:
    """Replicate chains run to a fixed horizon."""

    TARGET = GammaTarget(0.5, 0.5)
    SPEC = SamplerSpec("corv_sgld", ConstantStepsize(1e-2), make_transform("softplus"))

    def test_steps_to_horizon(self):
        assert steps_to_horizon(10.0, 0.1) == 100
        assert steps_to_horizon(10.0, 3e-3) == 3334
        assert steps_to_horizon(1e-3, 1.0) == 1

    def test_report_shape(self):
        report = weak_error_experiment(self.SPEC, self.TARGET, GradientOracle(self.TARGET),
                                       T=1.0, stepsizes=[0.5, 0.25], n_replicates=4, seed=3)
        assert report.stepsizes.tolist() == [0.5, 0.25]
        assert report.errors.shape == (2,)
        assert report.truth == pytest.approx(0.25)
        assert report.label == "corv_sgld[softplus]"
        assert [v.size + d for v, d in zip(report.replicate_values, report.divergences)] == [4, 4]
        # fewer than three stepsizes cannot give a slope
        assert math.isnan(report.fitted_slope)

    def test_second_moment_truth(self):
        target = NormalTarget(1.0, 2.0)
        spec = SamplerSpec("sgld", ConstantStepsize(0.1))
        report = weak_error_experiment(spec, target, GradientOracle(target), T=0.5,
                                       stepsizes=[0.1, 0.05], n_replicates=3, h="square")
        assert report.truth == pytest.approx(5.0)

    def test_deterministic(self):
        kwargs = dict(T=0.5, stepsizes=[0.1, 0.05], n_replicates=5, seed=9)
        a = weak_error_experiment(self.SPEC, self.TARGET, GradientOracle(self.TARGET), **kwargs)
        b = weak_error_experiment(self.SPEC, self.TARGET, GradientOracle(self.TARGET), **kwargs)
        np.testing.assert_array_equal(a.errors, b.errors)

    def test_resolution_rule(self):
        resolved = resolved_above_noise([1.0, 1.0, 1.0, math.nan, 0.0], [0.4, 0.5, 0.6, 0.1, 0.0])
        assert resolved.tolist() == [True, False, False, False, False]

    def test_underpowered_are_exactly_the_unfitted(self):
        # E[theta_T] = 0 for every stepsize, so each error is pure Monte Carlo noise
        target = NormalTarget()
        spec = SamplerSpec("sgld", ConstantStepsize(0.1))
        report = weak_error_experiment(spec, target, GradientOracle(target), T=0.2,
                                       stepsizes=[0.1, 0.05, 0.02, 0.01, 0.005], n_replicates=50)
        resolved = resolved_above_noise(report.errors, report.std_errors)
        assert report.underpowered == report.stepsizes[~resolved].tolist()
        assert report.underpowered
        if np.count_nonzero(resolved) < 3:
            assert math.isnan(report.fitted_slope)

    def test_require_powered_raises(self):
        target = NormalTarget()
        spec = SamplerSpec("sgld", ConstantStepsize(0.1))
        with pytest.raises(ComputationError, match="Monte Carlo noise"):
            weak_error_experiment(spec, target, GradientOracle(target), T=0.2,
                                  stepsizes=[0.1, 0.05, 0.02, 0.01, 0.005], n_replicates=50,
                                  require_powered=True)

    def test_coupled_chains_share_a_path(self):
        target = NormalTarget()
        spec = SamplerSpec("sgld", ConstantStepsize(0.01))
        coarse, fine = coupled_final_values(spec, target, GradientOracle(target), 0.01, 1.0,
                                            n_replicates=500, refine=4, seed=2)
        assert coarse.shape == fine.shape == (500,)
        assert np.corrcoef(coarse, fine)[0, 1] > 0.99
        assert np.std(coarse - fine) < 0.05 * np.std(coarse)

    def test_coupled_slope_is_first_order(self):
        # Euler on the Ornstein-Uhlenbeck mean from theta_0 = 2: 2(1 - eps)^n against 2 exp(-T)
        target = NormalTarget()
        spec = SamplerSpec("sgld", ConstantStepsize(0.1))
        report = weak_error_experiment(spec, target, GradientOracle(target), T=1.0,
                                       stepsizes=[0.1, 0.03, 0.01], n_replicates=1000, seed=4,
                                       initial_phi=2.0, estimator="coupled", refine=4,
                                       require_powered=True)
        assert report.estimator == "coupled"
        assert report.underpowered == []
        assert report.increments[0] == pytest.approx(2.0 * (0.975 ** 40 - 0.9 ** 10), rel=0.3)
        assert 0.8 <= report.fitted_slope <= 1.2
        assert np.all(np.isfinite(report.errors))

    def test_coupled_needs_exact_gradients(self):
        oracle = GradientOracle(self.TARGET, 1.0, "additive-noise")
        with pytest.raises(ConfigError):
            weak_error_experiment(self.SPEC, self.TARGET, oracle, T=0.5, stepsizes=[0.1, 0.05],
                                  n_replicates=5, estimator="coupled")

    @pytest.mark.parametrize("kwargs", [
        dict(stepsizes=[0.1, 0.2]),
        dict(stepsizes=[]),
        dict(T=0.0),
        dict(n_replicates=1),
        dict(h="cube"),
        dict(estimator="bootstrap"),
        dict(estimator="coupled", refine=1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            weak_error_experiment(self.SPEC, self.TARGET, GradientOracle(self.TARGET), **kwargs)


class TestInstabilityScan:
    """Ito update size as theta approaches a singular boundary."""

    THETAS = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]

    def test_ito_blows_up_and_corv_does_not(self):
        eps = 1e-3
        rows = ito_instability_scan(BetaTarget(0.5, 0.5), make_transform("sigmoid"),
                                     self.THETAS, stepsize=eps, n_draws=1000, seed=0)
        assert [r.theta for r in rows] == self.THETAS
        ito = [r.ito_median_jump for r in rows]
        assert all(b > a for a, b in zip(ito, ito[1:]))
        assert ito[-1] > 1e3
        for row in rows:
            assert not row.ito_diverged
            assert row.corv_drift <= 2.0 * eps
            assert row.corv_median_jump < 0.1
