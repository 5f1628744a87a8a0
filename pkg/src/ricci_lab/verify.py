"""Residual checks for soliton structures and the integral identities.

Pointwise checks return raw residual arrays so tests can look at single
points; the structured checks (integral identities, eigenvalue
extraction, diameter bound) return report objects ready for JSON
serialization. Nothing here mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import jets, ops
from .catalog import GeometrySpec, NonGradientWitness, SolitonData
from .fields import (MetricField, OneFormField, ScalarField, SmoothMap,
                     VectorField, scalar_add, scalar_exp, scalar_log,
                     scalar_scale, scalar_square)
from .quadrature import QuadratureRule, integrate, sphere_rule
from .util import ParameterError

POINTWISE_TOL = 1e-8
INTEGRAL_TOL = 1e-6
CONSISTENCY_TOL = 1e-12
EIGEN_TOL = 1e-6


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of a single named check.

    ``passed`` is ``value <= tol`` for residuals and ``value >= tol``
    when ``comparison`` is ``">="`` (used by checks that must witness a
    quantity staying away from zero).
    """

    label: str
    value: float
    tol: float
    passed: bool
    comparison: str = "<="
    details: dict = dc_field(default_factory=dict)

    @classmethod
    def of(cls, label: str, value: float, tol: float,
           comparison: str = "<=", **details) -> "ResidualReport":
        value = float(value)
        passed = value >= tol if comparison == ">=" else value <= tol
        return cls(label=label, value=value, tol=tol, passed=bool(passed),
                   comparison=comparison, details=details)

    def as_dict(self) -> dict:
        return {"label": self.label, "value": self.value, "tol": self.tol,
                "passed": self.passed, "comparison": self.comparison,
                "details": dict(self.details)}


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum('...i,...j->...ij', a, b)


def _lam_term(lam, gv: np.ndarray, pts: np.ndarray) -> np.ndarray:
    if isinstance(lam, ScalarField):
        return lam.value(pts)[..., None, None] * gv
    return float(lam) * gv


# ---------------------------------------------------------------------------
# Pointwise residuals


def soliton_residual(g: MetricField, x: VectorField, lam, theta: float,
                     omega: OneFormField, p) -> np.ndarray:
    """Ric + (1/2) L_X g - lam g - theta omega (x) omega at ``p``."""
    pts = np.asarray(p, dtype=float)
    gv = g.value(pts)
    ric = ops.ricci(g, pts)
    lie = ops.lie_derivative_metric(x, g, pts)
    w = omega.value(pts)
    return ric + 0.5 * lie - _lam_term(lam, gv, pts) - theta * _outer(w, w)


def gradient_soliton_residual(g: MetricField, eta: ScalarField, lam,
                              theta: float, xi: ScalarField,
                              p) -> np.ndarray:
    """Ric + Hess(eta) - lam g - theta d xi (x) d xi at ``p``."""
    pts = np.asarray(p, dtype=float)
    gv = g.value(pts)
    ric = ops.ricci(g, pts)
    hess = ops.hessian_scalar(eta, g, pts)
    dxi = xi.d(pts)
    return ric + hess - _lam_term(lam, gv, pts) - theta * _outer(dxi, dxi)


def du_identity_residual(g: MetricField, u: ScalarField, p) -> np.ndarray:
    """du (x) du - (1/2) Hess(u^2) + u Hess(u); identically zero.

    The three Hessians are taken with respect to ``g``, so the identity
    exercises the connection terms, not just partial derivatives.
    """
    pts = np.asarray(p, dtype=float)
    du = u.d(pts)
    hess_u = ops.hessian_scalar(u, g, pts)
    hess_u2 = ops.hessian_scalar(scalar_square(u), g, pts)
    uval = u.value(pts)[..., None, None]
    return _outer(du, du) - 0.5 * hess_u2 + uval * hess_u


def quasi_einstein_roundtrip(g: MetricField, h: ScalarField, n: float,
                             p) -> dict:
    """Three algebraically equal quasi-Einstein residuals.

    Starting from a potential ``h`` the same structure can be written
    with the potential itself (parameter r = 4n), with the conformal
    factor f = exp(-h/(2n)), or split into eta = h and xi = h/2. The
    three residual tensors are built through independent derivative
    paths (direct, exp, log) and must agree pointwise.
    """
    if n <= 0:
        raise ParameterError(f"constraint violated: n > 0 (got n={n})")
    pts = np.asarray(p, dtype=float)
    ric = ops.ricci(g, pts)

    e1 = ric + ops.hessian_scalar(h, g, pts) \
        - _outer(h.d(pts), h.d(pts)) / (4.0 * n)

    phi = scalar_scale(h, 0.5)
    f = scalar_exp(phi, -1.0 / n)
    fv = f.value(pts)[..., None, None]
    e2 = ric + ops.hessian_scalar(phi, g, pts) \
        - (n / fv) * ops.hessian_scalar(f, g, pts)

    xi = scalar_scale(scalar_log(f), -n)
    eta = scalar_add(phi, xi)
    dxi = xi.d(pts)
    e3 = ric + ops.hessian_scalar(eta, g, pts) - _outer(dxi, dxi) / n

    gap = max(np.abs(e1 - e2).max(), np.abs(e2 - e3).max(),
              np.abs(e1 - e3).max())
    return {"e1": e1, "e2": e2, "e3": e3, "gap": float(gap)}


def trace_identity_residual(data: SolitonData, p) -> np.ndarray:
    """Trace of the soliton equation: S + div X - m lam - theta |omega|^2.

    For gradient structures div X is the Laplacian of the potential and
    omega = d xi. Vanishes identically whenever the full equation holds.
    """
    pts = np.asarray(p, dtype=float)
    g = data.geometry.metric
    m = g.dim
    s = ops.scalar_curvature(g, pts)
    lam = data.lam_values(pts)
    ginv = ops.metric_inverse(g, pts)
    if data.kind == "soliton":
        div = ops.divergence_vector(data.X, g, pts)
        w = data.omega.value(pts)
    else:
        div = ops.laplacian_scalar(data.eta, g, pts)
        w = data.xi.d(pts)
    w2 = np.einsum('...ij,...i,...j->...', ginv, w, w)
    return s + div - m * lam - data.theta * w2


def divergence_consistency(x: VectorField, g: MetricField, p) -> float:
    """Max gap between div X and (1/2) tr_g L_X g (independent paths)."""
    pts = np.asarray(p, dtype=float)
    div = ops.divergence_vector(x, g, pts)
    lie = ops.lie_derivative_metric(x, g, pts)
    ginv = ops.metric_inverse(g, pts)
    tr = 0.5 * np.einsum('...ij,...ij->...', ginv, lie)
    return float(np.abs(div - tr).max())


# ---------------------------------------------------------------------------
# Integral identities


def _rel_gap(lhs: float, rhs_terms: list[float]) -> tuple[float, float]:
    gap = abs(lhs - sum(rhs_terms))
    scale = max(1.0, abs(lhs), *(abs(t) for t in rhs_terms))
    return gap, gap / scale


def integral_identity_check(data: SolitonData, rule: QuadratureRule,
                            tol: float = INTEGRAL_TOL
                            ) -> list[ResidualReport]:
    """Both closed-manifold integral identities for a gradient structure.

    The basic identity balances the traceless Ricci energy against the
    curvature-gradient and omega terms; the refined one trades the omega
    term for the traceless Hessian of xi and the eigenvalue-style
    quadratic in (Laplacian xi, |grad xi|). Each report carries every
    term so a failure localizes immediately.
    """
    if data.X is None or data.xi is None:
        raise ParameterError("integral identities need X and xi data")
    g = data.geometry.metric
    m = g.dim
    pts = rule.points
    gv = g.value(pts)
    ginv = ops.metric_inverse(g, pts)
    ric = ops.ricci(g, pts)
    s = jets.scalar_curvature(ginv, ric)
    ric0 = jets.traceless(ric, gv, ginv)
    xv = data.X.value(pts)
    theta = data.theta

    lhs = integrate(rule, jets.norm2_cov2(ric0, ginv))
    grad_s = ops.grad_scalar_curvature(g, pts)
    pair_sx = np.einsum('...ij,...i,...j->...', gv, grad_s, xv)
    t_grad = (m - 2) / (2.0 * m) * integrate(rule, pair_sx)
    w_sharp = jets.sharp(data.omega.value(pts), ginv)
    t_omega = theta * integrate(
        rule, np.einsum('...ij,...i,...j->...', ric0, w_sharp, w_sharp))
    gap0, rel0 = _rel_gap(lhs, [t_grad, t_omega])

    hess_xi = ops.hessian_scalar(data.xi, g, pts)
    hess0 = jets.traceless(hess_xi, gv, ginv)
    t_hess = -theta * integrate(rule, jets.norm2_cov2(hess0, ginv))
    lap_xi = np.einsum('...ij,...ij->...', ginv, hess_xi)
    dxi = data.xi.d(pts)
    grad_xi2 = np.einsum('...ij,...i,...j->...', ginv, dxi, dxi)
    t_eigen = theta * (m - 1) / m * integrate(
        rule, lap_xi ** 2 - s / (m - 1) * grad_xi2)
    gap1, rel1 = _rel_gap(lhs, [t_grad, t_hess, t_eigen])

    return [
        ResidualReport.of(
            "integral-identity-basic", rel0, tol,
            lhs=lhs, grad_term=t_grad, omega_term=t_omega, gap_abs=gap0,
            order=rule.order),
        ResidualReport.of(
            "integral-identity-refined", rel1, tol,
            lhs=lhs, grad_term=t_grad, hessian_term=t_hess,
            eigen_term=t_eigen, gap_abs=gap1, order=rule.order),
    ]


def bochner_stokes_check(g: MetricField, u: ScalarField,
                         rule: QuadratureRule,
                         tol: float = INTEGRAL_TOL) -> ResidualReport:
    """Integrated Bochner identity for an arbitrary scalar on a closed
    manifold:

    int [ Ric0(grad u, grad u) + |Hess0 u|^2 ]
        = (m-1)/m int [ (Lap u)^2 - S/(m-1) |grad u|^2 ].
    """
    m = g.dim
    pts = rule.points
    gv = g.value(pts)
    ginv = ops.metric_inverse(g, pts)
    ric = ops.ricci(g, pts)
    s = jets.scalar_curvature(ginv, ric)
    ric0 = jets.traceless(ric, gv, ginv)
    hess = ops.hessian_scalar(u, g, pts)
    hess0 = jets.traceless(hess, gv, ginv)
    du = u.d(pts)
    grad_u = jets.sharp(du, ginv)
    lap = np.einsum('...ij,...ij->...', ginv, hess)
    grad2 = np.einsum('...ij,...i,...j->...', ginv, du, du)
    lhs = integrate(rule,
                    np.einsum('...ij,...i,...j->...', ric0, grad_u, grad_u)
                    + jets.norm2_cov2(hess0, ginv))
    rhs = (m - 1) / m * integrate(rule, lap ** 2 - s / (m - 1) * grad2)
    gap, rel = _rel_gap(lhs, [rhs])
    return ResidualReport.of("bochner-stokes", rel, tol,
                             lhs=lhs, rhs=rhs, gap_abs=gap, order=rule.order)


# ---------------------------------------------------------------------------
# Eigenvalue extraction


@dataclass(frozen=True)
class EigenReport:
    """Estimated eigenvalue data for a candidate xi with Lap xi =
    -alpha (xi - c1)."""

    alpha_hat: float
    eigen_residual: float
    is_eigenfunction: bool
    alpha_expected: float
    alpha_gap: float
    hessian_residual: float | None = None

    def as_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat,
                "eigen_residual": self.eigen_residual,
                "is_eigenfunction": self.is_eigenfunction,
                "alpha_expected": self.alpha_expected,
                "alpha_gap": self.alpha_gap,
                "hessian_residual": self.hessian_residual}


def eigen_check(g: MetricField, xi: ScalarField, c1: float, p,
                tol: float = EIGEN_TOL) -> EigenReport:
    """Fit alpha from -Lap xi / (xi - c1) and measure the residual.

    Points where xi - c1 is below a fifth of its sup are excluded from
    the fit (the ratio degenerates there); the residual itself is
    evaluated everywhere. The reference value is the mean of
    S / (m - 1), the sharp constant in the equality case. When c1 = 0
    the conformal Hessian equation
    Hess xi + (S / (m (m - 1))) xi g = 0 is also measured.
    """
    pts = np.asarray(p, dtype=float)
    m = g.dim
    lap = ops.laplacian_scalar(xi, g, pts)
    dev = xi.value(pts) - c1
    scale = np.abs(dev).max()
    if scale == 0.0:
        raise ParameterError("xi - c1 vanishes identically on the sample")
    mask = np.abs(dev) >= 0.2 * scale
    alpha_hat = float(np.mean(-lap[mask] / dev[mask]))
    resid = float(np.abs(lap + alpha_hat * dev).max() / max(1.0, scale))
    s = ops.scalar_curvature(g, pts)
    alpha_expected = float(np.mean(s) / (m - 1))
    hess_resid = None
    if c1 == 0.0:
        hess = ops.hessian_scalar(xi, g, pts)
        gv = g.value(pts)
        coeff = (s / (m * (m - 1)))[..., None, None]
        xiv = xi.value(pts)[..., None, None]
        hess_resid = float(np.abs(hess + coeff * xiv * gv).max())
    return EigenReport(alpha_hat=alpha_hat, eigen_residual=resid,
                       is_eigenfunction=bool(resid <= tol),
                       alpha_expected=alpha_expected,
                       alpha_gap=float(abs(alpha_hat - alpha_expected)),
                       hessian_residual=hess_resid)


def eigen_equality_check(data: SolitonData, p,
                         tol: float = EIGEN_TOL) -> EigenReport:
    """Eigen extraction for a gradient bundle's xi, using its c1."""
    if data.xi is None:
        raise ParameterError("eigen check needs a gradient bundle with xi")
    c1 = float(data.geometry.params.get("c1", 0.0))
    return eigen_check(data.geometry.metric, data.xi, c1, p, tol=tol)


# ---------------------------------------------------------------------------
# Diameter bound


def ricci_lower_bound_and_diameter(kappa: float, tau: float,
                                   count: int = 400) -> dict:
    """Myers-type diameter bound for the Berger soliton branch.

    Needs theta = 4 tau^2 - kappa > 0 (the soliton exists) and
    c2 = kappa - 2 tau^2 > 0 (positive Ricci lower bound after moving
    the drift term to the right side). The field bound c1 = sup |X| is
    measured on a sample rather than asserted.
    """
    from .catalog import berger_soliton
    theta = 4.0 * tau ** 2 - kappa
    if theta <= 0:
        raise ParameterError(
            f"constraint violated: 4*tau^2 > kappa "
            f"(got 4*tau^2={4 * tau ** 2}, kappa={kappa})")
    c2 = kappa - 2.0 * tau ** 2
    if c2 <= 0:
        raise ParameterError(
            f"constraint violated: kappa > 2*tau^2 "
            f"(got kappa={kappa}, 2*tau^2={2 * tau ** 2})")
    data = berger_soliton(kappa, tau)
    g = data.geometry.metric
    pts = data.geometry.sample(count)
    gv = g.value(pts)
    xv = data.X.value(pts)
    c1 = float(np.sqrt(
        np.einsum('...ij,...i,...j->...', gv, xv, xv).max()))
    m = g.dim
    bound = (np.pi / c2) * (c1 + np.sqrt(c1 ** 2 + (m - 1) * c2))
    return {"c1": c1, "c2": c2, "m": m, "theta": theta,
            "diameter_bound": float(bound)}


# ---------------------------------------------------------------------------
# Suite driver


def _max_abs(arr: np.ndarray) -> float:
    return float(np.abs(arr).max())


def verify_suite(bundle, count: int = 100, quad_order: int = 16,
                 seed: int | None = None,
                 tol_pointwise: float = POINTWISE_TOL,
                 tol_integral: float = INTEGRAL_TOL,
                 tol_eigen: float = EIGEN_TOL) -> list[ResidualReport]:
    """Run the checks appropriate to a catalog bundle.

    Accepts the objects returned by :func:`ricci_lab.catalog.build` and
    returns one report per check, in a stable order.
    """
    reports: list[ResidualReport] = []
    if isinstance(bundle, SolitonData):
        geom = bundle.geometry
        pts = geom.sample(count, seed)
        g = geom.metric
        if bundle.kind == "soliton":
            reports.append(ResidualReport.of(
                "soliton-residual",
                _max_abs(soliton_residual(g, bundle.X, bundle.lam,
                                          bundle.theta, bundle.omega, pts)),
                tol_pointwise, points=count))
            reports.append(ResidualReport.of(
                "divergence-consistency",
                divergence_consistency(bundle.X, g, pts), CONSISTENCY_TOL))
        else:
            reports.append(ResidualReport.of(
                "gradient-soliton-residual",
                _max_abs(gradient_soliton_residual(
                    g, bundle.eta, bundle.lam, bundle.theta, bundle.xi,
                    pts)),
                tol_pointwise, points=count))
        reports.append(ResidualReport.of(
            "trace-identity",
            _max_abs(trace_identity_residual(bundle, pts)), tol_pointwise))
        if bundle.phi is not None and bundle.target is not None:
            tau = ops.tension_field(bundle.phi, g, bundle.target.metric, pts)
            drift = np.einsum('...ik,...i->...k', bundle.phi.d(pts),
                              bundle.X.value(pts))
            reports.append(ResidualReport.of(
                "map-drift-residual", _max_abs(tau - drift), tol_pointwise))
            if bundle.omega_N is not None:
                pulled = ops.pullback_oneform(bundle.phi, bundle.omega_N,
                                              pts)
                reports.append(ResidualReport.of(
                    "omega-pullback-residual",
                    _max_abs(pulled - bundle.omega.value(pts)),
                    tol_pointwise))
        if bundle.kind == "gradient-almost" and "m" in geom.params \
                and geom.params.get("r") == 1.0:
            m = geom.params["m"]
            if m in (2, 3):
                rule = sphere_rule(m, quad_order)
                reports.extend(integral_identity_check(bundle, rule,
                                                       tol_integral))
            eig = eigen_equality_check(bundle, pts, tol=tol_eigen)
            reports.append(ResidualReport.of(
                "eigen-equality", eig.eigen_residual, tol_eigen,
                **{k: v for k, v in eig.as_dict().items()
                   if k != "eigen_residual"}))
    elif isinstance(bundle, NonGradientWitness):
        pts = bundle.flat.sample(count, seed)
        xb = ops.flat(bundle.X, bundle.flat.metric, pts)
        du = bundle.u.d(pts)
        reports.append(ResidualReport.of(
            "gradient-in-flat-metric", _max_abs(xb - du), tol_pointwise))
        wpts = bundle.warped.sample(count, seed)
        form = ops.musical_flat_field(bundle.X, bundle.warped.metric)
        dxb = ops.exterior_derivative_oneform(form, wpts)
        reports.append(ResidualReport.of(
            "non-gradient-in-warped-metric", _max_abs(dxb), 1e-3,
            comparison=">="))
    elif isinstance(bundle, GeometrySpec):
        pts = bundle.sample(count, seed)
        gv = bundle.metric.value(pts)
        try:
            np.linalg.cholesky(gv)
            spd = 0.0
        except np.linalg.LinAlgError:
            spd = np.inf
        reports.append(ResidualReport.of("metric-spd", spd, 0.0))
    else:
        raise TypeError(f"no verification suite for {type(bundle).__name__}")
    return reports
