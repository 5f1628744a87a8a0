"""Coupled flow: right-hand sides, the integrated reference solution,
the published closed forms, the grid integrator, and the gauge-fixed
correspondence."""

import numpy as np
import pytest
import sympy as sp

from ricci_lab import catalog, flow, ops
from ricci_lab.fields import MetricField, ScalarField, SmoothMap, VectorField
from ricci_lab.util import FlowAbort, ParameterError, WindowError

from conftest import sample


@pytest.fixture(scope="module")
def oracle22():
    return flow.build_self_similar(2, -2.0)


@pytest.fixture(scope="module")
def probe_pts():
    geom = catalog.hyperbolic_warped(2)
    return geom.sample(9, seed=11)


# ---------------------------------------------------------------------------
# Right-hand sides


class TestFlowRHS:
    def test_decoupled_flow_on_the_sphere(self):
        """With omega = 0 the sphere shrinks: dg/dt = -2 (m-1) g."""
        geom = catalog.round_sphere(2)
        zero = __import__("ricci_lab").fields.OneFormField(
            2, lambda p: np.zeros(p.shape[:-1] + (2,)))
        pts = sample(geom, 25)
        rhs = flow.flow_rhs(geom.metric, zero, 1.0, pts)
        assert np.abs(rhs + 2.0 * geom.metric.value(pts)).max() < 1e-9

    def test_slope_matches_soliton_combination(self, warped22, probe_pts):
        """At t = 0 the flow must produce -2 lam g + L_X g."""
        geom = warped22.geometry
        rhs = flow.flow_rhs(geom.metric, warped22.omega, warped22.theta,
                            probe_pts)
        lie = ops.lie_derivative_metric(warped22.X, geom.metric, probe_pts)
        expected = -2.0 * warped22.lam * geom.metric.value(probe_pts) + lie
        assert np.abs(rhs - expected).max() < 1e-10

    def test_map_rhs_is_the_tension(self, warped22, probe_pts):
        rhs = flow.map_rhs(warped22.phi, warped22.geometry.metric,
                           warped22.target.metric, probe_pts)
        tau = ops.tension_field(warped22.phi, warped22.geometry.metric,
                                warped22.target.metric, probe_pts)
        assert np.array_equal(rhs, tau)


class TestDeTurckField:
    def test_conformal_pair_closed_form(self):
        """g = e^{2u} delta against delta: Z = (m-2) e^{-2u} grad u."""
        xs = sp.symbols("x1:4", real=True)
        u = sp.Rational(1, 10) * xs[0] * xs[1] + sp.Rational(1, 20) * xs[2]
        g = MetricField.from_sympy(xs, sp.exp(2 * u) * sp.eye(3), name="cf")
        pts = np.random.default_rng(2).uniform(-1, 1, (20, 3))
        z = flow.deturck_field(g, MetricField.euclidean(3), pts)
        uf = ScalarField.from_sympy(xs, u)
        du = uf.d(pts)
        expected = np.exp(-2.0 * uf.value(pts))[:, None] * du
        assert np.abs(z - expected).max() < 1e-10

    def test_dimension_two_is_gauge_trivial_for_conformal_pairs(self):
        xs = sp.symbols("x1:3", real=True)
        u = sp.Rational(1, 5) * xs[0] - sp.Rational(1, 10) * xs[1] ** 2
        g = MetricField.from_sympy(xs, sp.exp(2 * u) * sp.eye(2))
        pts = np.random.default_rng(3).uniform(-1, 1, (15, 2))
        z = flow.deturck_field(g, MetricField.euclidean(2), pts)
        assert np.abs(z).max() < 1e-10

    def test_same_metric_gives_zero_field(self, warped22, probe_pts):
        g = warped22.geometry.metric
        z = flow.deturck_field(g, g, probe_pts)
        assert np.abs(z).max() < 1e-11


class TestNaturality:
    def test_tension_transforms_as_a_pullback(self):
        g = catalog.round_sphere(2).metric
        h = MetricField.euclidean(2)
        pts = np.random.default_rng(4).uniform(-0.6, 0.6, (15, 2))
        for seed in (0, 1, 2):
            psi = flow.random_diffeo(2, seed)
            phi = flow.random_quadratic_map(2, 2, seed + 100)
            gap = flow.tension_naturality_check(phi, psi, g, h, pts)
            assert gap < 1e-6

    def test_identity_diffeo_is_exact(self):
        g = catalog.round_sphere(2).metric
        h = MetricField.euclidean(2)
        pts = np.random.default_rng(5).uniform(-0.6, 0.6, (10, 2))
        gap = flow.tension_naturality_check(
            flow.random_quadratic_map(2, 2, 7), SmoothMap.identity(2), g, h,
            pts)
        assert gap < 1e-10


class TestSolitonConditions:
    def test_warped_triple_passes(self, warped22, probe_pts):
        reports = flow.msoliton_conditions_check(warped22, probe_pts)
        assert [r.label for r in reports] == [
            "msoliton-metric", "msoliton-map", "msoliton-omega"]
        assert all(r.passed for r in reports)

    def test_wrong_lambda_fails_the_metric_leg(self, probe_pts):
        import dataclasses
        good = catalog.warped_soliton(2, -2.0)
        bad = dataclasses.replace(good, lam=-1.9)
        reports = flow.msoliton_conditions_check(bad, probe_pts)
        by = {r.label: r for r in reports}
        assert not by["msoliton-metric"].passed
        assert by["msoliton-map"].passed  # the map legs ignore lam


# ---------------------------------------------------------------------------
# Self-similar reference solution


class TestSelfSimilarOracle:
    def test_psi1_matches_printed_formula(self, oracle22, probe_pts):
        printed = flow.PrintedForms(2, -2.0)
        for t in (0.1, 0.75):
            psi = oracle22.psi_jets(t, probe_pts)[0]
            ref = printed.psi_values(t, probe_pts)
            assert np.abs(psi[:, 0] - ref[:, 0]).max() < 1e-8

    def test_metric_coefficients_match_derived_forms(self, oracle22):
        """A(t) = c and B(t) = c^{(1-m)/lam}, so B = sqrt(c) here."""
        t = 0.75
        c = oracle22.c(t)
        pts = np.array([[0.3, 0.7], [-0.4, 0.2]])
        gv = oracle22.metric_at(t).value(pts)
        assert np.abs(gv[:, 0, 0] - c).max() < 1e-9
        expected_w = np.sqrt(c) * np.exp(2.0 * pts[:, 0])
        assert np.abs(gv[:, 1, 1] - expected_w).max() < 1e-8
        assert np.abs(gv[:, 0, 1]).max() < 1e-9

    def test_window_is_enforced(self, oracle22):
        with pytest.raises(WindowError):
            oracle22.metric_at(-0.3)   # c(t) = 1 + 4t <= 0 there

    def test_flow_residual_small_with_second_order_fd(self, oracle22,
                                                      probe_pts):
        out = flow.residual_convergence(oracle22, 0.25, probe_pts,
                                        dts=(2e-3, 1e-3))
        last = out["rows"][-1]
        assert last["metric"] < 1e-5
        assert last["map"] < 1e-5
        order = out["orders"][0]
        assert abs(order["metric"] - 2.0) < 0.2
        assert abs(order["map"] - 2.0) < 0.2

    def test_omega_pullback_is_time_independent(self, oracle22, probe_pts):
        w0 = oracle22.omega_at(0.0).value(probe_pts)
        w1 = oracle22.omega_at(0.25).value(probe_pts)
        assert np.abs(w1 - w0).max() < 1e-9


class TestPrintedForms:
    def test_agree_with_oracle_at_time_zero(self, oracle22, probe_pts):
        printed = flow.PrintedForms(2, -2.0)
        g0 = printed.metric_at(0.0).value(probe_pts)
        g0_ref = oracle22.metric_at(0.0).value(probe_pts)
        assert np.abs(g0 - g0_ref).max() < 1e-12

    def test_printed_metric_fails_the_flow_it_claims_to_solve(self,
                                                              probe_pts):
        """The published fiber coefficient does not satisfy the flow for
        t > 0; the residual is order one, far beyond discretization."""
        printed = flow.PrintedForms(2, -2.0)
        resid = flow.flow_residual_of_solution(printed, 0.25, probe_pts)
        assert resid["metric"] > 1.0
        assert resid["map"] < 1e-5   # the printed map leg does pass

    def test_fiber_components_deviate_from_the_oracle(self, oracle22,
                                                      probe_pts):
        printed = flow.PrintedForms(2, -2.0)
        psi = oracle22.psi_jets(0.75, probe_pts)[0]
        ref = printed.psi_values(0.75, probe_pts)
        assert np.abs(psi[:, 1] - ref[:, 1]).max() > 1e-2


class TestDeTurckOracle:
    def test_closed_form_solves_the_gauge_fixed_flow(self, probe_pts):
        oracle = flow.DeTurckOracle(2, -2.0)
        out = flow.deturck_solution_residual(oracle, 0.1, probe_pts)
        assert out["metric"] < 1e-8   # A, B linear in t: FD_t is exact
        assert out["map"] < 1e-8
        assert out["gauge_field_gap"] < 1e-9

    def test_gauge_field_vanishes_at_start(self):
        oracle = flow.DeTurckOracle(2, -2.0)
        assert oracle.zeta(0.0) == 0.0

    def test_reduces_to_direct_flow_at_start(self, warped22, probe_pts):
        g = warped22.geometry.metric
        direct = flow.flow_rhs(g, warped22.omega, warped22.theta, probe_pts)
        gauged = flow.deturck_rhs(g, g, warped22.omega, warped22.theta,
                                  probe_pts)
        assert np.abs(direct - gauged).max() < 1e-9


# ---------------------------------------------------------------------------
# Grid integrator


def _grid(lo, hi, n, oracle):
    x = np.linspace(lo, hi, n)
    pts = np.zeros((n, oracle.m))
    pts[:, 0] = x
    return x, np.ones(n), np.exp(2.0 * x), oracle.base.phi.value(pts)


class TestIntegrator:
    def test_zero_forcing_state_is_bitwise_frozen(self, oracle22):
        x = np.linspace(-1.0, 1.0, 41)
        phi0 = np.full((41, 1), 3.0)
        run = flow.integrate_flow_1d(
            x, np.ones(41), np.ones(41), phi0, m=2, theta=oracle22.theta,
            lam=-2.0, a_off=oracle22.a, t_end=0.01,
            bc=flow.StaticBC(2, 1))
        assert np.array_equal(run.final.A, np.ones(41))
        assert np.array_equal(run.final.W, np.ones(41))
        assert np.array_equal(run.final.phi, phi0)
        assert run.steps > 0

    def test_matches_oracle_on_a_short_horizon(self, oracle22):
        x, a0, w0, phi0 = _grid(-1.0, 1.0, 61, oracle22)
        t_end = 0.01
        bc = flow.OracleBC(flow.oracle_boundary_fn(
            oracle22, np.r_[x[:2], x[-2:]], t_end), pad=2)
        run = flow.integrate_flow_1d(
            x, a0, w0, phi0, m=2, theta=oracle22.theta, lam=-2.0,
            a_off=oracle22.a, t_end=t_end, bc=bc)
        pts = np.zeros((x.size, 2))
        pts[:, 0] = x
        gv = oracle22.metric_at(t_end).value(pts)
        assert np.abs(run.final.A - gv[:, 0, 0]).max() < 1e-3
        assert (np.abs(run.final.W - gv[:, 1, 1])
                / np.maximum(1.0, gv[:, 1, 1])).max() < 1e-3

    def test_snapshots_are_recorded_in_order(self, oracle22):
        x = np.linspace(-1.0, 1.0, 41)
        phi0 = np.full((41, 1), 3.0)
        run = flow.integrate_flow_1d(
            x, np.ones(41), np.ones(41), phi0, m=2, theta=oracle22.theta,
            lam=-2.0, a_off=oracle22.a, t_end=0.01,
            bc=flow.StaticBC(2, 1), snapshots=(0.004, 0.008))
        times = [s.t for s in run.snapshots]
        assert times == [0.0, 0.004, 0.008, 0.01]

    def test_parameter_gates(self, oracle22):
        x = np.linspace(-1.0, 1.0, 41)
        ones = np.ones(41)
        phi0 = np.full((41, 1), 3.0)
        kw = dict(m=2, theta=oracle22.theta, lam=-2.0, a_off=oracle22.a,
                  t_end=0.01, bc=flow.StaticBC(2, 1))
        with pytest.raises(ParameterError, match="uniform"):
            flow.integrate_flow_1d(x ** 3, ones, ones, phi0, **kw)
        with pytest.raises(ParameterError, match="mode"):
            flow.integrate_flow_1d(x, ones, ones, phi0,
                                   **{**kw, "mode": "imex"})
        with pytest.raises(ParameterError, match="pads"):
            flow.integrate_flow_1d(x, ones, ones, phi0,
                                   **{**kw, "mode": "deturck"})
        with pytest.raises(ParameterError, match="m >= 2"):
            flow.integrate_flow_1d(x, ones, ones, phi0, **{**kw, "m": 1})
        with pytest.raises(ParameterError, match="too small"):
            flow.integrate_flow_1d(x[:6], ones[:6], ones[:6], phi0[:6],
                                   **kw)

    def test_positivity_breach_aborts_with_location(self, oracle22):
        """Boundary data driving W through zero must stop the run.

        W is the breached field on purpose: the step size scales with
        min(A), so an A breach only shrinks dt toward the crossing
        instead of reaching it."""
        x = np.linspace(-1.0, 1.0, 21)
        phi0 = np.full((21, 1), 3.0)

        def value_fn(t):
            k = 4
            return (np.ones(k), np.full(k, 1.0 - 40.0 * t),
                    np.full((k, 1), 3.0))

        with pytest.raises(FlowAbort, match="positivity lost"):
            flow.integrate_flow_1d(
                x, np.ones(21), np.ones(21), phi0, m=2,
                theta=oracle22.theta, lam=-2.0, a_off=oracle22.a,
                t_end=0.05, bc=flow.OracleBC(value_fn, pad=2))


class TestCorrespondence:
    def test_gauge_fixed_run_pulls_back_to_the_direct_one(self):
        out = flow.deturck_correspondence_check(
            2, -2.0, x_lo=-1.0, x_hi=1.0, nodes=61, t_end=0.005)
        assert out["gap_A"] < 1e-2
        assert out["gap_W"] < 1e-2
        assert out["gap_phi"] < 1e-2
        assert out["direct_steps"] > 0 and out["deturck_steps"] > 0


class TestRandomGenerators:
    def test_diffeo_is_a_bounded_perturbation(self):
        psi = flow.random_diffeo(3, seed=9, amplitude=0.1)
        pts = np.random.default_rng(0).uniform(-2, 2, (50, 3))
        assert np.abs(psi.value(pts) - pts).max() <= 0.1 + 1e-12
        jac = psi.d(pts)
        dets = np.linalg.det(jac)
        assert (dets > 0).all()

    def test_quadratic_map_shapes(self):
        phi = flow.random_quadratic_map(2, 3, seed=1)
        pts = np.zeros((7, 2))
        assert phi.value(pts).shape == (7, 3)
        assert phi.d(pts).shape == (7, 2, 3)
        assert phi.dd(pts).shape == (7, 2, 2, 3)
