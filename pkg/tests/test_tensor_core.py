"""Curvature, connection, and map operators against closed-form values."""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from ricci_lab import catalog, jets, ops
from ricci_lab.fields import (MetricField, ScalarField, SmoothMap,
                              TensorField2, VectorField, compose_map,
                              pullback_metric_field, scalar_mul)
from ricci_lab.util import MetricError, UnsupportedFieldError

from conftest import bumpy_metric, sample


# ---------------------------------------------------------------------------
# Connection coefficients


class TestChristoffel:
    def test_euclidean_connection_vanishes(self):
        geom = catalog.euclidean(3)
        gamma = ops.christoffel(geom.metric, sample(geom, 20))
        assert np.abs(gamma).max() == 0.0

    def test_warped_product_coefficients(self):
        """For diag(1, e^{2 x1}): Gamma^1_22 = -e^{2 x1}, Gamma^2_12 = 1."""
        geom = catalog.hyperbolic_warped(2)
        pts = sample(geom, 25)
        gamma = ops.christoffel(geom.metric, pts)
        w = np.exp(2.0 * pts[:, 0])
        assert np.abs(gamma[:, 0, 1, 1] + w).max() < 1e-11
        assert np.abs(gamma[:, 1, 0, 1] - 1.0).max() < 1e-11
        assert np.abs(gamma[:, 1, 1, 0] - 1.0).max() < 1e-11

    def test_symmetry_in_lower_indices(self, berger92):
        pts = sample(berger92.geometry, 30)
        gamma = ops.christoffel(berger92.geometry.metric, pts)
        assert np.abs(gamma - np.swapaxes(gamma, -1, -2)).max() < 1e-10


# ---------------------------------------------------------------------------
# Curvature


class TestRicci:
    @pytest.mark.parametrize("m", [2, 3])
    def test_round_sphere_is_einstein(self, m):
        """Ric = (m-1) g on the unit sphere."""
        geom = catalog.round_sphere(m)
        pts = sample(geom, 40)
        ric = ops.ricci(geom.metric, pts)
        gv = geom.metric.value(pts)
        assert np.abs(ric - (m - 1) * gv).max() < 1e-9

    @pytest.mark.parametrize("r", [1.0, 2.0])
    def test_scalar_curvature_scales_with_radius(self, r):
        geom = catalog.round_sphere(2, r)
        s = ops.scalar_curvature(geom.metric, sample(geom, 30))
        assert np.abs(s - 2.0 / r ** 2).max() < 1e-9

    def test_berger_scalar_curvature(self, berger92):
        """S = 2 kappa - 2 tau^2 for the Berger family."""
        pts = sample(berger92.geometry, 30)
        s = ops.scalar_curvature(berger92.geometry.metric, pts)
        assert np.abs(s - 10.0).max() < 1e-8

    def test_hyperbolic_warped_ricci(self):
        """diag(1, e^{2 x1}, e^{2 x1}) has Ric = -(m-1) g."""
        geom = catalog.hyperbolic_warped(3)
        pts = sample(geom, 25)
        ric = ops.ricci(geom.metric, pts)
        gv = geom.metric.value(pts)
        assert np.abs(ric + 2.0 * gv).max() < 1e-9

    def test_ricci_is_symmetric(self, berger92):
        pts = sample(berger92.geometry, 20)
        ric = ops.ricci(berger92.geometry.metric, pts)
        assert np.abs(ric - np.swapaxes(ric, -1, -2)).max() < 1e-10

    def test_contracted_bianchi(self):
        """div Ric = dS / 2 for a metric with no special symmetry."""
        g, _ = bumpy_metric()
        pts = np.random.default_rng(7).uniform(-0.8, 0.8, (25, 3))
        ric = ops.ricci_tensor_field(g)
        div = ops.divergence_sym2(ric, g, pts)
        grad_s = ops.grad_scalar_curvature(g, pts)
        gv = g.value(pts)
        ds = np.einsum('...ij,...j->...i', gv, grad_s)
        assert np.abs(div - 0.5 * ds).max() < 1e-6

    def test_non_spd_metric_is_rejected(self):
        xs = sp.symbols("x1:3", real=True)
        bad = MetricField.from_sympy(xs, sp.diag(1, -1), name="lorentz")
        with pytest.raises(MetricError):
            ops.ricci(bad, np.zeros((4, 2)))




# ---------------------------------------------------------------------------
# Lie derivative


class TestLieDerivative:
    def test_euler_field_dilates_flat_metric(self):
        geom = catalog.euclidean(2)
        xs = sp.symbols("x1:3", real=True)
        euler = VectorField.from_sympy(xs, list(xs), name="euler")
        pts = sample(geom, 20)
        lie = ops.lie_derivative_metric(euler, geom.metric, pts)
        target = 2.0 * np.broadcast_to(np.eye(2), lie.shape)
        assert np.abs(lie - target).max() < 1e-12

    def test_rotation_is_killing(self):
        geom = catalog.euclidean(2)
        xs = sp.symbols("x1:3", real=True)
        rot = VectorField.from_sympy(xs, [-xs[1], xs[0]], name="rot")
        lie = ops.lie_derivative_metric(rot, geom.metric, sample(geom, 20))
        assert np.abs(lie).max() < 1e-12

    def test_fiber_direction_is_killing_on_berger(self, berger92):
        """E3 generates the Hopf circle action, an isometry."""
        lie = ops.lie_derivative_metric(
            berger92.X, berger92.geometry.metric,
            sample(berger92.geometry, 30))
        assert np.abs(lie).max() < 1e-9


# ---------------------------------------------------------------------------
# Hessians and Laplacians


class TestHessian:
    def test_height_function_hessian_is_conformal(self, sphere2):
        """Hess h = -h g for heights on the unit sphere."""
        h = catalog.sphere_height(sphere2, [0.0, 0.0, 1.0])
        pts = sample(sphere2, 30)
        hess = ops.hessian_scalar(h, sphere2.metric, pts)
        hv = h.value(pts)[:, None, None]
        gv = sphere2.metric.value(pts)
        assert np.abs(hess + hv * gv).max() < 1e-9

    @pytest.mark.parametrize("m", [2, 3])
    def test_height_laplacian_eigenvalue(self, m):
        """Lap h = -m h: first spherical harmonic."""
        geom = catalog.round_sphere(m)
        v = np.zeros(m + 1)
        v[0] = 1.0
        h = catalog.sphere_height(geom, v)
        pts = sample(geom, 30)
        lap = ops.laplacian_scalar(h, geom.metric, pts)
        assert np.abs(lap + m * h.value(pts)).max() < 1e-9

    def test_gradient_against_components(self):
        geom = catalog.hyperbolic_warped(2)
        xs = sp.symbols("x1:3", real=True)
        f = ScalarField.from_sympy(xs, xs[0] + xs[1] ** 2, name="f")
        pts = sample(geom, 20)
        grad = ops.gradient(f, geom.metric, pts)
        # g^{11} = 1, g^{22} = e^{-2 x1}
        assert np.abs(grad[:, 0] - 1.0).max() < 1e-12
        expected = 2.0 * pts[:, 1] * np.exp(-2.0 * pts[:, 0])
        assert np.abs(grad[:, 1] - expected).max() < 1e-11


# ---------------------------------------------------------------------------
# Maps: tension, pullbacks, composition


class TestMaps:
    def test_tension_of_exponential_map(self, warped22):
        """Lap phi = lam (lam - m + 1) e^{-lam x1} b, flat target."""
        geom = warped22.geometry
        pts = sample(geom, 30)
        tau = ops.tension_field(warped22.phi, geom.metric,
                                warped22.target.metric, pts)
        expected = 6.0 * np.exp(2.0 * pts[:, 0])
        assert np.abs(tau[:, 0] - expected).max() < 1e-8

    def test_tension_equals_drift(self, warped22):
        geom = warped22.geometry
        pts = sample(geom, 30)
        tau = ops.tension_field(warped22.phi, geom.metric,
                                warped22.target.metric, pts)
        drift = np.einsum('...ik,...i->...k', warped22.phi.d(pts),
                          warped22.X.value(pts))
        assert np.abs(tau - drift).max() < 1e-8

    def test_harmonic_for_linear_maps_flat_to_flat(self):
        xs = sp.symbols("x1:3", real=True)
        phi = SmoothMap.from_sympy(xs, [2 * xs[0] + xs[1], xs[1] - xs[0]])
        flat2 = MetricField.euclidean(2)
        tau = ops.tension_field(phi, flat2, flat2,
                                np.random.default_rng(1).normal(size=(20, 2)))
        assert np.abs(tau).max() < 1e-10

    def test_pullback_functoriality(self):
        """(psi o phi)^* g = phi^* (psi^* g)."""
        xs = sp.symbols("x1:3", real=True)
        phi = SmoothMap.from_sympy(
            xs, [xs[0] + sp.Rational(1, 10) * xs[1] ** 2,
                 xs[1] - sp.Rational(1, 20) * xs[0] * xs[1]])
        psi = SmoothMap.from_sympy(
            xs, [sp.sin(xs[0]) + xs[1], xs[0] - sp.cos(xs[1])])
        g = catalog.round_sphere(2).metric
        pts = np.random.default_rng(3).uniform(-0.7, 0.7, (25, 2))
        combined = pullback_metric_field(compose_map(psi, phi), g)
        staged = pullback_metric_field(phi, pullback_metric_field(psi, g))
        assert np.abs(combined.value(pts) - staged.value(pts)).max() < 1e-10
        assert np.abs(combined.d(pts) - staged.d(pts)).max() < 1e-8

    def test_embedding_is_isometric(self, sphere3):
        """Stereographic chart metric = pullback of the ambient metric."""
        emb = sphere3.fields["embedding"]
        pts = sample(sphere3, 30)
        pulled = ops.pullback_metric(emb, MetricField.euclidean(4), pts)
        assert np.abs(pulled - sphere3.metric.value(pts)).max() < 1e-11


# ---------------------------------------------------------------------------
# Algebra: musical isomorphisms, traceless part


class TestAlgebra:
    def test_traceless_of_diagonal(self):
        flat = MetricField.euclidean(2)
        t = TensorField2(2, lambda p: np.broadcast_to(
            np.diag([1.0, 3.0]), p.shape[:-1] + (2, 2)), symmetric=True)
        pts = np.zeros((5, 2))
        out = ops.traceless(t, flat, pts)
        assert np.abs(out - np.diag([-1.0, 1.0])).max() < 1e-14

    def test_sharp_flat_roundtrip(self, berger92):
        geom = berger92.geometry
        pts = sample(geom, 30)
        gv = geom.metric.value(pts)
        ginv = ops.metric_inverse(geom.metric, pts)
        xv = berger92.X.value(pts)
        back = jets.sharp(jets.flat(xv, gv), ginv)
        assert np.abs(back - xv).max() < 1e-12

    def test_exterior_derivative_kills_gradients(self, sphere2):
        h = catalog.sphere_height(sphere2, [1.0, 0.0, 0.0])
        form = ops.musical_flat_field(
            VectorField(2, lambda p: ops.gradient(h, sphere2.metric, p)),
            sphere2.metric)
        dw = ops.exterior_derivative_oneform(form, sample(sphere2, 20))
        assert np.abs(dw).max() < 1e-6


# ---------------------------------------------------------------------------
# Jet oracles


class TestJetOracles:
    def test_fd_fallback_matches_analytic_jets(self):
        xs = sp.symbols("x1:3", real=True)
        expr = sp.exp(xs[0]) * sp.cos(xs[1])
        exact = ScalarField.from_sympy(xs, expr, name="exact")
        fd_only = ScalarField(exact.value, name="fd")
        pts = np.random.default_rng(5).uniform(-1, 1, (20, 2))
        assert np.abs(exact.d(pts) - fd_only.d(pts)).max() < 1e-8
        assert np.abs(exact.dd(pts) - fd_only.dd(pts)).max() < 1e-5

    def test_fd_refusal_when_disallowed(self):
        f = ScalarField(lambda p: p[..., 0], allow_fd=False)
        with pytest.raises(UnsupportedFieldError):
            f.d(np.zeros((3, 2)))

    def test_scalar_combinator_jets(self):
        xs = sp.symbols("x1:3", real=True)
        u = ScalarField.from_sympy(xs, xs[0] ** 2, name="u")
        v = ScalarField.from_sympy(xs, sp.sin(xs[1]), name="v")
        w = scalar_mul(u, v)
        pts = np.random.default_rng(9).uniform(-1, 1, (15, 2))
        ref = ScalarField.from_sympy(xs, xs[0] ** 2 * sp.sin(xs[1]))
        assert np.abs(w.value(pts) - ref.value(pts)).max() < 1e-13
        assert np.abs(w.d(pts) - ref.d(pts)).max() < 1e-13
        assert np.abs(w.dd(pts) - ref.dd(pts)).max() < 1e-13


# ---------------------------------------------------------------------------
# Batched kernel properties


@st.composite
def spd_2x2(draw):
    a = draw(st.floats(-1.5, 1.5))
    b = draw(st.floats(-1.5, 1.5))
    c = draw(st.floats(-1.5, 1.5))
    mat = np.array([[a, b], [c, a + c]])
    return mat @ mat.T + 0.5 * np.eye(2)


@settings(max_examples=40, deadline=None)
@given(g=spd_2x2(), vec=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_musical_roundtrip_property(g, vec):
    ginv = jets.cholesky_inverse(g[None])[0]
    x = np.array(vec)
    assert np.abs(jets.sharp(jets.flat(x, g), ginv) - x).max() < 1e-9


@settings(max_examples=40, deadline=None)
@given(g=spd_2x2(), t00=st.floats(-2, 2), t01=st.floats(-2, 2),
       t11=st.floats(-2, 2))
def test_traceless_property(g, t00, t01, t11):
    """Traceless part is idempotent and has zero metric trace."""
    ginv = jets.cholesky_inverse(g[None])[0]
    t = np.array([[t00, t01], [t01, t11]])
    t0 = jets.traceless(t, g, ginv)
    assert abs(np.einsum('ij,ij->', ginv, t0)) < 1e-10
    again = jets.traceless(t0, g, ginv)
    assert np.abs(again - t0).max() < 1e-10
