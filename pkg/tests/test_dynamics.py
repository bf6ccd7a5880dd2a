"""Trajectories, topology-change detection, and the mass balance.

The oracle for the integrated stocks is the closed-form antiderivative
of the reference flows; it is itself cross-checked once against
adaptive quadrature.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import circnet as cn

from conftest import make_demo_spec

PI = math.pi


def abs_sin_integral(t: float) -> float:
    """Integral of |sin(pi tau)| from 0 to t (t >= 0)."""
    k = math.floor(t)
    return (2.0 * k + 1.0 - math.cos(PI * (t - k))) / PI


def abs_cos_integral(t: float) -> float:
    """Integral of |cos(pi tau)| from 0 to t (t >= 0)."""
    return abs_sin_integral(t + 0.5) - abs_sin_integral(0.5)


def analytic_stocks(m0, t: float) -> np.ndarray:
    """Exact stock trajectories of the reference loop under mass balance."""
    s, c = abs_sin_integral(t), abs_cos_integral(t)
    return np.array(
        [
            m0[0] + 1.3 * t - s - c,
            m0[1] + s - 4.0 * t,
            m0[2] + c - 3.0 * t,
            m0[3] + 5.7 * t,
        ]
    )


def test_oracle_against_quadrature():
    for t in (0.3, 0.5, 0.9, 1.0, 1.37, 2.0):
        kinks = [x for x in (0.5, 1.0, 1.5) if x < t]
        s_quad, _ = quad(lambda x: abs(math.sin(PI * x)), 0.0, t, points=kinks or None, limit=200)
        c_quad, _ = quad(lambda x: abs(math.cos(PI * x)), 0.0, t, points=kinks or None, limit=200)
        assert abs_sin_integral(t) == pytest.approx(s_quad, abs=1e-10)
        assert abs_cos_integral(t) == pytest.approx(c_quad, abs=1e-10)


def test_oracle_matches_published_endpoints():
    # spot values quoted for the reference run with m0 = 10 everywhere
    m0 = [10.0] * 4
    assert analytic_stocks(m0, 0.5) == pytest.approx(
        [10 + 0.65 - 2 / PI, 8 + 1 / PI, 8.5 + 1 / PI, 12.85], abs=1e-12
    )
    assert analytic_stocks(m0, 2.0) == pytest.approx(
        [10 + 2.6 - 8 / PI, 2 + 4 / PI, 4 + 4 / PI, 21.4], abs=1e-12
    )


class TestTrajectory:
    def test_reference_samples(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 201)
        traj = cn.indicator_trajectory(demo_spec, grid)
        assert len(traj) == 201
        by_index = {i: r for i, (_, r) in enumerate(traj)}
        for i in (0, 100, 200):  # t = 0, 1, 2
            assert by_index[i].lambda_aa == pytest.approx(0.44, abs=0.05)
        for i in (50, 150):  # t = 0.5, 1.5
            assert by_index[i].lambda_aa == 1.0
        t25 = traj[25]
        assert t25[0] == pytest.approx(0.25, abs=1e-12)
        assert t25[1].lambda_d == pytest.approx((11 + math.sqrt(2)) / 1.3, abs=1e-9)

    def test_constant_network_is_flat(self):
        spec = cn.NetworkSpec(
            n_v=3,
            stocks=(cn.Constant(1), cn.Constant(2), cn.Constant(3)),
            flows=(
                cn.FlowEntry(1, 2, cn.Constant(0.5)),
                cn.FlowEntry(2, 1, cn.Constant(0.25)),
            ),
        )
        traj = cn.indicator_trajectory(spec, cn.TimeGrid(0, 1, 11))
        first = traj[0][1]
        assert all(r == first for _, r in traj[1:])


class TestTopologyDetection:
    def test_reference_change_instants(self, demo_spec):
        timeline = cn.detect_topology_changes(demo_spec, cn.TimeGrid(0, 2, 201))
        stars = timeline.change_instants()
        assert len(stars) == 5
        for got, want in zip(stars, (0.0, 0.5, 1.0, 1.5, 2.0)):
            assert got == pytest.approx(want, abs=1e-6)

    def test_grazing_zeros_are_flagged_touching(self, demo_spec):
        timeline = cn.detect_topology_changes(demo_spec, cn.TimeGrid(0, 2, 201))
        touching = [c.touching for c in timeline.changes]
        assert touching == [False, True, True, True, False]
        mid = timeline.changes[1]
        assert mid.vanished == ((1, 3),) and mid.appeared == ((1, 3),)

    def test_refinement_lands_on_true_zeros(self, demo_spec):
        # the flows vanish exactly on the integer / half-integer lattice;
        # each reported instant must sit within the refinement tolerance
        # of a true zero of every arc it reports, and the arc must carry
        # flow one grid step away
        eps = cn.DEFAULT_EPS_FLOW
        refine_tol = 1e-9
        grid = cn.TimeGrid(0, 2, 201)
        timeline = cn.detect_topology_changes(demo_spec, grid, refine_tol=refine_tol)
        true_zeros = {(1, 2): [0.0, 1.0, 2.0], (1, 3): [0.5, 1.5]}
        entry = {(f.tail, f.head): f.entry for f in demo_spec.flows}
        from circnet.model import entry_value

        for change in timeline.changes:
            for arc in set(change.appeared) | set(change.vanished):
                gap = min(abs(change.t_star - z) for z in true_zeros[arc])
                assert gap <= 2 * refine_tol
                flank = [
                    entry_value(entry[arc], max(grid.start, change.t_star - grid.h)),
                    entry_value(entry[arc], min(grid.end, change.t_star + grid.h)),
                ]
                assert max(flank) > eps

    def test_constant_network_has_single_interval(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(1), cn.Constant(1)),
            flows=(cn.FlowEntry(1, 2, cn.Constant(2)),),
        )
        timeline = cn.detect_topology_changes(spec, cn.TimeGrid(0, 1, 11))
        assert timeline.changes == ()
        assert len(timeline.intervals) == 1
        assert timeline.intervals[0].arcs == ((1, 2),)

    def test_positive_flow_window_has_no_changes(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(1), cn.Constant(1)),
            flows=(cn.FlowEntry(1, 2, cn.Expression.parse("abs(sin(pi*t))")),),
        )
        timeline = cn.detect_topology_changes(spec, cn.TimeGrid(0.1, 0.9, 81))
        assert timeline.changes == ()

    def test_intervals_partition_window(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 201)
        timeline = cn.detect_topology_changes(demo_spec, grid)
        ivs = timeline.intervals
        assert ivs[0].t_start == grid.start
        assert ivs[-1].t_end == grid.end
        for a, b in zip(ivs, ivs[1:]):
            assert a.t_end == b.t_start
            assert a.arcs != b.arcs


class TestVerify:
    def test_reference_network_violates_balance(self, demo_spec):
        verdict = cn.verify_mass_balance(demo_spec, cn.TimeGrid(0, 2, 201), tol=1e-6)
        assert not verdict.consistent
        assert verdict.max_residual == pytest.approx(5.7, abs=1e-9)
        assert verdict.worst_vertex == 4

    def test_static_zero_flow_network_is_consistent(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(4), cn.Constant(6)),
            flows=(),
        )
        verdict = cn.verify_mass_balance(spec, cn.TimeGrid(0, 1, 21), tol=1e-12)
        assert verdict.consistent
        assert verdict.max_residual == 0.0

    def test_imposed_result_verifies_consistent(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        verdict = cn.verify_mass_balance(result.corrected, grid, tol=1e-3)
        assert verdict.consistent


class TestImpose:
    def test_reference_matches_analytic_solution(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        times = grid.times
        for target in (0.5, 1.0, 1.5, 2.0):
            i = int(round((target - grid.start) / grid.h))
            assert times[i] == pytest.approx(target, abs=1e-12)
            expected = analytic_stocks([10.0] * 4, target)
            assert np.abs(result.stocks[i] - expected).max() < 1e-3

    def test_zero_flow_network_keeps_initial_stocks(self):
        spec = cn.NetworkSpec(
            n_v=3,
            stocks=(cn.Constant(0), cn.Constant(0), cn.Constant(0)),
            flows=(),
        )
        result = cn.impose_mass_balance(spec, [1.0, 2.0, 3.0], cn.TimeGrid(0, 5, 41))
        assert np.array_equal(result.stocks, np.tile([1.0, 2.0, 3.0], (41, 1)))

    def test_total_mass_conserved(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        assert np.abs(result.m_net - 40.0).max() <= 1e-6
        assert result.m_in == 0.0 and result.m_out == 0.0

    def test_integrator_is_fourth_order_between_kinks(self, demo_spec):
        # the flows are smooth inside (0, 0.5); halving the step must cut
        # the error by at least 8x (Simpson converges at fourth order)
        m0 = analytic_stocks([10.0] * 4, 0.1)

        def max_err(n_steps: int) -> float:
            grid = cn.TimeGrid(0.1, 0.4, n_steps)
            result = cn.impose_mass_balance(demo_spec, m0, grid)
            errs = [
                np.abs(
                    result.stocks[i]
                    - (analytic_stocks([10.0] * 4, float(t)) - analytic_stocks([10.0] * 4, 0.1) + m0)
                ).max()
                for i, t in enumerate(grid.times)
            ]
            return max(errs)

        coarse, fine = max_err(10), max_err(19)
        assert coarse > 1e-12  # not already at floating-point noise
        assert coarse / fine >= 8.0

    def test_centered_differences_recover_theta_a(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        h = grid.h
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        times = grid.times
        kinks = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
        from circnet.dynamics import _theta_a_from_flows

        worst = 0.0
        for i in range(1, len(times) - 1):
            if np.min(np.abs(kinks - times[i])) < 3 * h:
                continue
            central = (result.stocks[i + 1] - result.stocks[i - 1]) / (2 * h)
            theta = _theta_a_from_flows(demo_spec, float(times[i]))
            worst = max(worst, float(np.abs(central - theta).max()))
        assert worst <= 5.0 * h**2

    def test_continuity_across_topology_changes(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        steps = np.abs(np.diff(result.stocks, axis=0)).max()
        assert steps <= 5.7 * grid.h * 1.01  # bounded by max |dm/dt| * h

    def test_negative_stock_flagged_not_clamped(self):
        spec = cn.NetworkSpec(
            n_v=2,
            stocks=(cn.Constant(0), cn.Constant(0)),
            flows=(cn.FlowEntry(1, 2, cn.Constant(1.0)),),
        )
        result = cn.impose_mass_balance(spec, [0.3, 0.0], cn.TimeGrid(0, 1, 101))
        assert result.negative_stocks
        event = result.negative_stocks[0]
        assert event.vertex == 1
        assert event.t == pytest.approx(0.31, abs=1e-9)
        assert result.stocks[-1, 0] == pytest.approx(-0.7, abs=1e-9)

    def test_m0_validation(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 21)
        with pytest.raises(cn.SpecError):
            cn.impose_mass_balance(demo_spec, [1.0, 2.0], grid)
        with pytest.raises(cn.SpecError):
            cn.impose_mass_balance(demo_spec, [-1.0, 0, 0, 0], grid)


class TestCorrectedTrajectory:
    def test_stock_aggregates_follow_integration(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 2001)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        traj = cn.corrected_indicator_trajectory(result, demo_spec, grid)
        theta_s = np.array([r.theta_s for _, r in traj])
        theta_d = np.array([r.theta_d for _, r in traj])
        assert np.abs(theta_s - 40.0).max() <= 1e-9
        assert abs(theta_d[0]) <= 1e-12
        assert np.all(np.diff(theta_d) >= 0.0)

    def test_other_indicators_match_uncorrected(self, demo_spec):
        grid = cn.TimeGrid(0, 2, 101)
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, grid)
        corrected = cn.corrected_indicator_trajectory(result, demo_spec, grid)
        plain = cn.indicator_trajectory(demo_spec, grid)
        for (_, a), (_, b) in zip(corrected, plain):
            for name in (
                "lambda_ga",
                "lambda_gr",
                "lambda_ha",
                "lambda_hr",
                "lambda_aa",
                "lambda_ar",
                "lambda_c",
                "lambda_y",
                "lambda_s",
                "lambda_d",
                "theta_f",
            ):
                assert getattr(a, name) == getattr(b, name)
            assert np.allclose(a.theta_a, b.theta_a, atol=1e-12)

    def test_grid_mismatch_rejected(self, demo_spec):
        result = cn.impose_mass_balance(demo_spec, [10.0] * 4, cn.TimeGrid(0, 2, 101))
        with pytest.raises(cn.GridMismatchError):
            cn.corrected_indicator_trajectory(result, demo_spec, cn.TimeGrid(0, 2, 201))
