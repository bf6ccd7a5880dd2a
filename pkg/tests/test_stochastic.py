"""Sampling, sample-mean matrices, and the Monte Carlo indicator report."""

import math

import numpy as np
import pytest

import circnet as cn

from conftest import make_demo_spec


def one_uncertain_flow(dist: cn.Distribution) -> cn.NetworkSpec:
    """Reference loop at its integer-time topology with flow 2->3 drawn
    from ``dist`` instead of being fixed at 4."""
    return cn.NetworkSpec(
        n_v=4,
        stocks=(cn.Constant(10), cn.Constant(20), cn.Constant(15), cn.Constant(5)),
        flows=(
            cn.FlowEntry(1, 3, cn.Constant(1.0)),
            cn.FlowEntry(2, 3, dist),
            cn.FlowEntry(3, 4, cn.Constant(7)),
            cn.FlowEntry(4, 1, cn.Constant(1.3)),
        ),
    )


class TestDrawing:
    def test_constant_spec_matches_deterministic_evaluation(self, demo_spec):
        for i in (0, 3):
            drawn = cn.draw_sample(demo_spec, seed=5, sample_index=i, at_t=0.25)
            assert np.array_equal(
                drawn.values, cn.network_to_matrix(demo_spec, 0.25).values
            )

    def test_zero_width_uniform_is_degenerate(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (4, 4)))
        for i in range(5):
            assert cn.draw_sample(spec, seed=9, sample_index=i).flow(2, 3) == 4.0

    def test_uniform_mean_within_three_standard_errors(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (0, 2)))
        n_s = 100_000
        draws = cn.draw_samples(spec, n_s, seed=123)[:, 1, 2]
        stderr = (2.0 / math.sqrt(12.0)) / math.sqrt(n_s)
        assert abs(draws.mean() - 1.0) <= 3.0 * stderr

    def test_single_draw_matches_batch_row(self):
        for dist in (
            cn.Distribution("uniform", (3, 5)),
            cn.Distribution("truncated-normal", (7, 2)),
            cn.Distribution("lognormal", (1.0, 0.5)),
            cn.Distribution("constant", (2.5,)),
        ):
            spec = one_uncertain_flow(dist)
            batch = cn.draw_samples(spec, 13, seed=77)
            for i in (0, 1, 5, 12):
                single = cn.draw_sample(spec, seed=77, sample_index=i)
                assert np.array_equal(single.values, batch[i])

    def test_draws_are_valid_matrices(self):
        specs = [
            one_uncertain_flow(cn.Distribution("uniform", (0, 2))),
            one_uncertain_flow(cn.Distribution("truncated-normal", (0.5, 3))),
            one_uncertain_flow(cn.Distribution("lognormal", (0.0, 2.0))),
        ]
        for seed, spec in enumerate(specs):
            samples = cn.draw_samples(spec, 2000, seed=seed)
            assert np.isfinite(samples).all()
            assert (samples >= 0.0).all()
            cn.validate_matrix(samples[1729 % len(samples)])

    def test_time_required_for_expression_entries(self, demo_spec):
        with pytest.raises(cn.TimeRequiredError):
            cn.draw_sample(demo_spec, seed=1)
        cn.draw_sample(demo_spec, seed=1, at_t=0.0)

    def test_entry_streams_are_independent_of_each_other(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(0), cn.Constant(0)),
            flows=(
                cn.FlowEntry(1, 2, cn.Distribution("uniform", (0, 1))),
                cn.FlowEntry(2, 1, cn.Distribution("uniform", (0, 1))),
            ),
        )
        samples = cn.draw_samples(spec, 500, seed=3)
        a, b = samples[:, 0, 1], samples[:, 1, 0]
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_truncated_normal_respects_support(self):
        spec = one_uncertain_flow(cn.Distribution("truncated-normal", (0.2, 1.0)))
        draws = cn.draw_samples(spec, 20_000, seed=8)[:, 1, 2]
        assert draws.min() >= 0.0
        assert (draws < 0.2).mean() > 0.1  # mass below the location survives

    def test_lognormal_median(self):
        spec = one_uncertain_flow(cn.Distribution("lognormal", (1.2, 0.7)))
        draws = cn.draw_samples(spec, 50_000, seed=4)[:, 1, 2]
        assert np.median(draws) == pytest.approx(math.exp(1.2), rel=0.03)


class TestSampleMean:
    def test_constant_spec_is_exact(self, demo_spec):
        mean = cn.sample_mean_matrix(demo_spec, 50, seed=0, at_t=0.0)
        assert np.array_equal(mean.values, cn.network_to_matrix(demo_spec, 0.0).values)

    def test_uniform_entry_converges(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        mean = cn.sample_mean_matrix(spec, 100_000, seed=11)
        assert 3.98 <= mean.values[1, 2] <= 4.02
        # the documented four-sigma convergence bound
        bound = 4.0 * (5.0 - 3.0) / math.sqrt(12.0 * 100_000)
        assert abs(mean.values[1, 2] - 4.0) <= bound

    def test_single_sample_mean_is_that_draw(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        mean = cn.sample_mean_matrix(spec, 1, seed=21)
        assert np.array_equal(mean.values, cn.draw_sample(spec, seed=21).values)


class TestStochasticIndicators:
    def test_degenerate_distributions_reproduce_reference(self):
        spec = one_uncertain_flow(cn.Distribution("constant", (4.0,)))
        report = cn.stochastic_indicators(spec, n_s=50, seed=0)
        deterministic = cn.compute_report(
            cn.network_to_matrix(one_uncertain_flow_as_constant(), 0.0)
        )
        assert report.mean_report == deterministic
        assert report.mean_report.lambda_aa == pytest.approx(0.44, abs=0.05)
        for name in ("lambda_aa", "lambda_gr", "theta_f"):
            stat = report.ensemble[name]
            assert stat.std == 0.0
            assert stat.mean == pytest.approx(getattr(deterministic, name), rel=1e-12)

    def test_mean_report_tracks_expected_flow(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        report = cn.stochastic_indicators(spec, n_s=100_000, seed=11)
        assert report.mean_report.lambda_aa == pytest.approx(0.4366, abs=0.01)

    def test_ensemble_mean_matches_quadrature_expectation(self):
        # independent oracle: E[am/(am + q)] for q ~ U(3, 5) with the
        # cycle arithmetic mean fixed at 3.1
        expected = (3.1 / 2.0) * math.log((3.1 + 5.0) / (3.1 + 3.0))
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        n_s = 20_000
        report = cn.stochastic_indicators(spec, n_s=n_s, seed=17)
        stat = report.ensemble["lambda_aa"]
        assert stat.undefined_count == 0
        assert stat.mean == pytest.approx(expected, abs=3 * 0.036 / math.sqrt(n_s))
        # mean of indicator and indicator of mean must differ here
        assert abs(stat.mean - report.mean_report.lambda_aa) > 1e-3

    def test_single_sample_has_zero_dispersion(self):
        spec = one_uncertain_flow(cn.Distribution("lognormal", (1.0, 0.3)))
        report = cn.stochastic_indicators(spec, n_s=1, seed=5)
        for stat in report.ensemble.values():
            if stat.mean is not None:
                assert stat.std == 0.0

    def test_reports_are_reproducible(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        a = cn.stochastic_indicators(spec, n_s=500, seed=99)
        b = cn.stochastic_indicators(spec, n_s=500, seed=99)
        assert a.mean_matrix == b.mean_matrix
        assert a.mean_report == b.mean_report
        assert a.ensemble == b.ensemble
        c = cn.stochastic_indicators(spec, n_s=500, seed=100)
        assert c.mean_matrix != a.mean_matrix

    def test_armless_samples_counted_undefined(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(1), cn.Constant(1)),
            flows=(cn.FlowEntry(1, 2, cn.Distribution("constant", (0.0,))),),
        )
        report = cn.stochastic_indicators(spec, n_s=25, seed=0)
        for name in ("lambda_ga", "lambda_ha", "lambda_aa", "lambda_d"):
            assert report.ensemble[name].mean is None
            assert report.ensemble[name].undefined_count == 25
        assert report.ensemble["theta_s"].mean == 2.0

    def test_budget_propagates(self):
        grid = np.full((6, 6), 1.0)
        np.fill_diagonal(grid, 0.0)
        spec = cn.NetworkSpec(
            n_v=6,
            stocks=tuple(cn.Constant(0) for _ in range(6)),
            flows=tuple(
                cn.FlowEntry(i, j, cn.Constant(1.0))
                for i in range(1, 7)
                for j in range(1, 7)
                if i != j
            ),
        )
        with pytest.raises(cn.CycleBudgetExceededError):
            cn.stochastic_indicators(spec, n_s=2, seed=0, max_cycles=100)

    def test_negative_seed_rejected(self):
        spec = one_uncertain_flow(cn.Distribution("uniform", (3, 5)))
        with pytest.raises(ValueError):
            cn.draw_sample(spec, seed=-1)


def one_uncertain_flow_as_constant() -> cn.NetworkSpec:
    return cn.NetworkSpec(
        n_v=4,
        stocks=(cn.Constant(10), cn.Constant(20), cn.Constant(15), cn.Constant(5)),
        flows=(
            cn.FlowEntry(1, 3, cn.Constant(1.0)),
            cn.FlowEntry(2, 3, cn.Constant(4.0)),
            cn.FlowEntry(3, 4, cn.Constant(7)),
            cn.FlowEntry(4, 1, cn.Constant(1.3)),
        ),
    )
