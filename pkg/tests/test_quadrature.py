"""Sphere quadrature: exactness, moments, convergence on a rough
integrand."""

import numpy as np
import pytest

from ricci_lab import catalog
from ricci_lab.quadrature import integrate, sphere_rule


VOLUME = {2: 4.0 * np.pi, 3: 2.0 * np.pi ** 2}


class TestRuleConstruction:
    @pytest.mark.parametrize("m", [0, 1, 4])
    def test_only_two_and_three_spheres(self, m):
        with pytest.raises(ValueError):
            sphere_rule(m, 8)

    def test_order_floor(self):
        with pytest.raises(ValueError):
            sphere_rule(2, 1)

    def test_metric_is_usable_at_every_node(self):
        # Nodes near the projection pole leave the sampling box but must
        # still be finite, SPD evaluation points of the chart metric.
        rule = sphere_rule(2, 16)
        geom = catalog.round_sphere(2)
        assert np.isfinite(rule.points).all()
        np.linalg.cholesky(geom.metric.value(rule.points))

    def test_weights_are_positive(self):
        for m in (2, 3):
            assert (sphere_rule(m, 12).weights > 0).all()


class TestExactness:
    @pytest.mark.parametrize("m", [2, 3])
    @pytest.mark.parametrize("order", [4, 8, 32])
    def test_volume(self, m, order):
        rule = sphere_rule(m, order)
        vol = integrate(rule, np.ones(rule.count))
        assert abs(vol - VOLUME[m]) < 1e-10

    @pytest.mark.parametrize("m", [2, 3])
    def test_first_moment_vanishes(self, m):
        geom = catalog.round_sphere(m)
        rule = sphere_rule(m, 16)
        v = np.zeros(m + 1)
        v[1] = 1.0
        h = catalog.sphere_height(geom, v)
        assert abs(integrate(rule, h)) < 1e-10

    @pytest.mark.parametrize("m", [2, 3])
    def test_second_moment_calibration(self, m):
        """int h_v^2 = Vol / (m + 1) for any unit direction."""
        geom = catalog.round_sphere(m)
        rule = sphere_rule(m, 16)
        v = np.zeros(m + 1)
        v[0] = 0.6
        v[m] = 0.8
        h = catalog.sphere_height(geom, v)
        val = integrate(rule, h.value(rule.points) ** 2)
        assert abs(val - VOLUME[m] / (m + 1)) < 1e-8

    def test_cross_moment_sees_the_angle(self):
        """int h_v h_w = (v . w) Vol / (m + 1)."""
        geom = catalog.round_sphere(2)
        rule = sphere_rule(2, 16)
        hv = catalog.sphere_height(geom, [1.0, 0.0, 0.0])
        hw = catalog.sphere_height(geom, [0.6, 0.0, 0.8])
        val = integrate(rule, hv.value(rule.points) * hw.value(rule.points))
        assert abs(val - 0.6 * VOLUME[2] / 3.0) < 1e-10


class TestConvergence:
    # int 1/(2 + h) has closed forms: 2 pi ln 3 on S^2 and
    # 4 pi^2 (2 - sqrt 3) on S^3, with h the last-axis height.
    EXACT = {2: 2.0 * np.pi * np.log(3.0),
             3: 4.0 * np.pi ** 2 * (2.0 - np.sqrt(3.0))}

    @pytest.mark.parametrize("m", [2, 3])
    def test_monotone_approach_on_rough_integrand(self, m):
        geom = catalog.round_sphere(m)
        v = np.zeros(m + 1)
        v[m] = 1.0
        h = catalog.sphere_height(geom, v)
        errs = []
        for order in (4, 8, 16, 32):
            rule = sphere_rule(m, order)
            val = integrate(rule, 1.0 / (2.0 + h.value(rule.points)))
            # clamp at round-off so 1e-15-scale jitter cannot flip the
            # monotonicity verdict
            errs.append(max(abs(val - self.EXACT[m]), 1e-13))
        assert all(b <= a for a, b in zip(errs, errs[1:]))
        assert errs[0] > 1e-5   # order 4 is genuinely coarse here
        assert errs[-1] < 1e-12

    def test_integrate_accepts_callables_and_fields(self):
        geom = catalog.round_sphere(2)
        rule = sphere_rule(2, 8)
        h = catalog.sphere_height(geom, [0.0, 0.0, 1.0])
        by_field = integrate(rule, h)
        by_callable = integrate(rule, lambda p: h.value(p))
        by_values = integrate(rule, h.value(rule.points))
        assert by_field == by_callable == by_values

    def test_shape_mismatch_is_an_error(self):
        rule = sphere_rule(2, 8)
        with pytest.raises(ValueError):
            integrate(rule, np.ones(rule.count + 1))
