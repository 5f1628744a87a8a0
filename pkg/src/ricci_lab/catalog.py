"""Concrete charts, metrics, fields, and soliton bundles.

Every instance carries analytic (sympy-generated) derivative oracles, so
downstream residuals sit at round-off rather than finite-difference
accuracy. Constructors validate their parameter inequalities and raise
:class:`~ricci_lab.util.ParameterError` naming the violated constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import sympy as sp

from .charts import Chart, box_chart, hopf_chart
from .fields import (MetricField, OneFormField, ScalarField, SmoothMap,
                     VectorField)
from .util import ParameterError


@dataclass(frozen=True)
class GeometrySpec:
    """A chart, a metric, and the named fields living on them."""

    label: str
    chart: Chart
    metric: MetricField
    fields: dict = dc_field(default_factory=dict)
    params: dict = dc_field(default_factory=dict)

    def sample(self, count: int = 100, seed: int | None = None) -> np.ndarray:
        return self.chart.sample(count, seed)


@dataclass(frozen=True)
class SolitonData:
    """A geometry together with the data entering the soliton equation.

    ``kind`` is one of ``"soliton"`` (vector field X and one-form omega),
    ``"gradient"`` or ``"gradient-almost"`` (potentials eta and xi; for
    the almost variant ``lam`` is a scalar field rather than a number).
    """

    geometry: GeometrySpec
    lam: object
    theta: float
    kind: str
    X: VectorField | None = None
    omega: OneFormField | None = None
    eta: ScalarField | None = None
    xi: ScalarField | None = None
    phi: SmoothMap | None = None
    target: GeometrySpec | None = None
    omega_N: OneFormField | None = None

    def lam_values(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if isinstance(self.lam, ScalarField):
            return self.lam.value(p)
        return np.full(p.shape[:-1], float(self.lam))


def _coords(m: int, stem: str = "x"):
    return sp.symbols(f"{stem}1:{m + 1}", real=True)


def _require(cond: bool, text: str):
    if not cond:
        raise ParameterError(f"constraint violated: {text}")


# ---------------------------------------------------------------------------
# Plain geometries


def euclidean(m: int) -> GeometrySpec:
    """Flat R^m with the identity metric."""
    _require(m >= 1, f"m >= 1 (got m={m})")
    chart = box_chart(m, f"euclidean-{m}")
    return GeometrySpec(label=f"euclidean(m={m})", chart=chart,
                        metric=MetricField.euclidean(m), params={"m": m})


def hyperbolic_warped(m: int) -> GeometrySpec:
    """The warped product line x fiber with warping e^{x_1}.

    Metric dx1^2 + e^{2 x1} sum_{i>=2} dx_i^2; Einstein with
    Ric = -(m-1) g.
    """
    _require(m >= 2, f"m >= 2 (got m={m})")
    xs = _coords(m)
    diag = [sp.Integer(1)] + [sp.exp(2 * xs[0])] * (m - 1)
    metric = MetricField.from_sympy(xs, sp.diag(*diag), name="warped")
    chart = box_chart(m, f"hyperbolic-warped-{m}")
    return GeometrySpec(label=f"hyperbolic-warped(m={m})", chart=chart,
                        metric=metric, params={"m": m})


def _sphere_embedding_exprs(xs, r):
    """Components of the inverse stereographic embedding into R^{m+1}."""
    s2 = sum(x ** 2 for x in xs)
    denom = s2 + r ** 2
    comps = [2 * r ** 2 * x / denom for x in xs]
    comps.append(r * (s2 - r ** 2) / denom)
    return comps


def round_sphere(m: int, r: float = 1.0) -> GeometrySpec:
    """Round m-sphere of radius r in the stereographic chart on R^m."""
    _require(m >= 1, f"m >= 1 (got m={m})")
    _require(r > 0, f"r > 0 (got r={r})")
    xs = _coords(m)
    rr = sp.Rational(r) if float(r).is_integer() else sp.Float(r)
    s2 = sum(x ** 2 for x in xs)
    rho = 4 * rr ** 4 / (rr ** 2 + s2) ** 2
    metric = MetricField.from_sympy(xs, rho * sp.eye(m), name=f"sphere-{m}")
    embedding = SmoothMap.from_sympy(xs, _sphere_embedding_exprs(xs, rr),
                                     name="stereo-embed")
    chart = box_chart(m, f"round-sphere-{m}-r{r}", lo=-1.5, hi=1.5)
    return GeometrySpec(label=f"round-sphere(m={m},r={r})", chart=chart,
                        metric=metric, fields={"embedding": embedding},
                        params={"m": m, "r": float(r)})


def sphere_height(geom: GeometrySpec, v) -> ScalarField:
    """Height function <p(x), v> pulled back through the embedding."""
    m = geom.params["m"]
    r = geom.params["r"]
    v = np.asarray(v, dtype=float)
    if v.shape != (m + 1,):
        raise ValueError(f"direction must live in R^{m + 1}")
    xs = _coords(m)
    comps = _sphere_embedding_exprs(xs, sp.Rational(r) if float(r).is_integer()
                                    else sp.Float(r))
    expr = sum(sp.Float(c) * e for c, e in zip(v, comps))
    return ScalarField.from_sympy(xs, expr, name="height")


def berger_sphere(kappa: float, tau: float) -> GeometrySpec:
    """Berger 3-sphere in the Hopf chart (eta, xi1, xi2).

    The round metric is dη^2 + cos^2(η) dξ1^2 + sin^2(η) dξ2^2; the
    Berger family rescales it and stretches the direction
    V = d/dξ1 + d/dξ2 tangent to the Hopf fibres. Carries the fields
    ``E3`` (unit fibre direction), its musical dual ``E3_flat``, and the
    raw ``V``/``V_flat``.
    """
    _require(kappa > 0, f"kappa > 0 (got kappa={kappa})")
    _require(tau != 0, f"tau != 0 (got tau={tau})")
    eta, xi1, xi2 = sp.symbols("eta xi1 xi2", real=True)
    coords = (eta, xi1, xi2)
    kap, tu = sp.Float(kappa), sp.Float(tau)
    ground = sp.diag(1, sp.cos(eta) ** 2, sp.sin(eta) ** 2)
    v_flat = sp.Matrix([0, sp.cos(eta) ** 2, sp.sin(eta) ** 2])
    beta = 4 * tu ** 2 / kap - 1
    g = (4 / kap) * (ground + beta * v_flat * v_flat.T)
    metric = MetricField.from_sympy(coords, g, name="berger")
    scale = kap / (4 * tu)
    e3 = VectorField.from_sympy(coords, [0, scale, scale], name="E3")
    e3_flat = OneFormField.from_sympy(
        coords, [(4 * tu / kap) * c for c in v_flat], name="E3_flat")
    v_vec = VectorField.from_sympy(coords, [0, 1, 1], name="V")
    v_form = OneFormField.from_sympy(coords, list(v_flat), name="V_flat")
    chart = hopf_chart(f"berger-{kappa}-{tau}")
    return GeometrySpec(
        label=f"berger-sphere(kappa={kappa},tau={tau})", chart=chart,
        metric=metric,
        fields={"E3": e3, "E3_flat": e3_flat, "V": v_vec, "V_flat": v_form},
        params={"kappa": float(kappa), "tau": float(tau), "m": 3})


def punctured_euclidean(n: int, a, theta: float, lam: float) -> GeometrySpec:
    """Flat target {y : y_gamma > a_gamma} carrying the one-form omega_N."""
    _require(n >= 1, f"n >= 1 (got n={n})")
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    _require(bool((a > 0).all()), f"a[gamma] > 0 (got a={a.tolist()})")
    _require(theta > 0, f"theta > 0 (got theta={theta})")
    ys = _coords(n, "y")
    comps = [sp.Float(-1.0 / (n * theta * lam)) / (y - sp.Float(av))
             for y, av in zip(ys, a)]
    omega_n = OneFormField.from_sympy(ys, comps, name="omega_N")
    chart = box_chart(n, f"punctured-{n}", lo=a + 0.5, hi=a + 4.0,
                      predicate=lambda p: (p > a).all(axis=-1))
    return GeometrySpec(label=f"punctured-euclidean(n={n})", chart=chart,
                        metric=MetricField.euclidean(n),
                        fields={"omega_N": omega_n},
                        params={"n": n, "a": tuple(a.tolist()),
                                "theta": float(theta), "lam": float(lam)})


# ---------------------------------------------------------------------------
# Soliton bundles


def berger_soliton(kappa: float, tau: float) -> SolitonData:
    """Berger sphere soliton: X = E3, lambda = kappa - 2 tau^2,
    theta = 4 tau^2 - kappa (positive on this branch), omega = E3_flat."""
    geom = berger_sphere(kappa, tau)
    theta = 4.0 * tau ** 2 - kappa
    _require(theta > 0, f"4*tau^2 > kappa (got 4*tau^2={4 * tau ** 2}, "
                        f"kappa={kappa})")
    lam = kappa - 2.0 * tau ** 2
    return SolitonData(geometry=geom, X=geom.fields["E3"],
                       omega=geom.fields["E3_flat"], lam=lam, theta=theta,
                       kind="soliton")


def warped_soliton(m: int, lam: float, n: int = 1, a=None,
                   b=None) -> SolitonData:
    """Warped-product soliton paired with the map into punctured space.

    Requires lambda < 1 - m so that theta = 1/(1 - lambda - m) > 0. The
    map is phi(x) = e^{-lambda x1} b + a with positive a, b.
    """
    _require(m >= 2, f"m >= 2 (got m={m})")
    _require(lam < 1 - m, f"lambda < 1 - m (got lambda={lam}, m={m})")
    _require(n >= 1, f"n >= 1 (got n={n})")
    a = np.ones(n) if a is None else np.broadcast_to(
        np.asarray(a, dtype=float), (n,))
    b = np.ones(n) if b is None else np.broadcast_to(
        np.asarray(b, dtype=float), (n,))
    _require(bool((a > 0).all()), f"a[gamma] > 0 (got a={a.tolist()})")
    _require(bool((b > 0).all()), f"b[gamma] > 0 (got b={b.tolist()})")
    theta = 1.0 / (1.0 - lam - m)
    geom = hyperbolic_warped(m)
    xs = _coords(m)
    x_comps = [sp.Float(m - lam - 1)] + [2 * sp.Float(lam) * x
                                         for x in xs[1:]]
    x_field = VectorField.from_sympy(xs, x_comps, name="X")
    omega = OneFormField.from_sympy(
        xs, [sp.Float(1.0 / theta)] + [sp.Integer(0)] * (m - 1), name="omega")
    phi_exprs = [sp.exp(-sp.Float(lam) * xs[0]) * sp.Float(bv) + sp.Float(av)
                 for av, bv in zip(a, b)]
    phi = SmoothMap.from_sympy(xs, phi_exprs, name="phi")
    target = punctured_euclidean(n, a, theta, lam)
    return SolitonData(geometry=geom, X=x_field, omega=omega, lam=float(lam),
                       theta=theta, kind="soliton", phi=phi, target=target,
                       omega_N=target.fields["omega_N"])


def obata_sphere(m: int, theta: float = 1.0, c1: float = 0.0,
                 c2: float = 0.0, v=None, w=None) -> SolitonData:
    """Gradient almost-soliton structure on the unit m-sphere.

    Built from height functions h_v, h_w:

    * xi  = c1 - h_v / m
    * eta = (theta/2)(c1 - h_v/m)^2 - h_w/m + c2
    * lam = theta (c1 - h_v/m) h_v/m + h_w/m + (m - 1)

    These are the unique gradient structures whose xi-gradient is
    conformal. ``v`` and ``w`` are unit directions in R^{m+1};
    defaults point along the last axis.
    """
    _require(m >= 2, f"m >= 2 (got m={m})")
    _require(theta > 0, f"theta > 0 (got theta={theta})")
    v = np.eye(m + 1)[m] if v is None else np.asarray(v, dtype=float)
    w = np.eye(m + 1)[m] if w is None else np.asarray(w, dtype=float)
    for name, vec in (("v", v), ("w", w)):
        _require(np.linalg.norm(vec) > 0, f"{name} != 0")
    v = v / np.linalg.norm(v)
    w = w / np.linalg.norm(w)
    geom = round_sphere(m, 1.0)
    xs = _coords(m)
    emb = _sphere_embedding_exprs(xs, sp.Integer(1))
    h_v = sum(sp.Float(c) * e for c, e in zip(v, emb))
    h_w = sum(sp.Float(c) * e for c, e in zip(w, emb))
    th = sp.Float(theta)
    xi = sp.Float(c1) - h_v / m
    eta = th / 2 * xi ** 2 - h_w / m + sp.Float(c2)
    lam = th * xi * h_v / m + h_w / m + (m - 1)
    s2 = sum(x ** 2 for x in xs)
    rho = 4 / (1 + s2) ** 2
    grad_eta = [sp.diff(eta, x) / rho for x in xs]
    bundle_fields = {
        "h_v": ScalarField.from_sympy(xs, h_v, name="h_v"),
        "h_w": ScalarField.from_sympy(xs, h_w, name="h_w"),
    }
    geom = GeometrySpec(label=f"obata-sphere(m={m})", chart=geom.chart,
                        metric=geom.metric,
                        fields={**geom.fields, **bundle_fields},
                        params={**geom.params, "theta": float(theta),
                                "c1": float(c1), "c2": float(c2),
                                "v": tuple(v.tolist()),
                                "w": tuple(w.tolist())})
    return SolitonData(
        geometry=geom,
        X=VectorField.from_sympy(xs, grad_eta, name="grad_eta"),
        omega=OneFormField.from_sympy(xs, [sp.diff(xi, x) for x in xs],
                                      name="dxi"),
        eta=ScalarField.from_sympy(xs, eta, name="eta"),
        xi=ScalarField.from_sympy(xs, xi, name="xi"),
        lam=ScalarField.from_sympy(xs, lam, name="lam"),
        theta=float(theta), kind="gradient-almost")


@dataclass(frozen=True)
class NonGradientWitness:
    """The same vector field seen by two metrics.

    Under the flat metric X is the gradient of ``u``; under the warped
    metric its musical dual has nonzero exterior derivative, so X cannot
    be a gradient there.
    """

    flat: GeometrySpec
    warped: GeometrySpec
    X: VectorField
    u: ScalarField
    params: dict


def non_gradient_witness(m: int, lam: float) -> NonGradientWitness:
    _require(m >= 2, f"m >= 2 (got m={m})")
    _require(lam < 1 - m, f"lambda < 1 - m (got lambda={lam}, m={m})")
    xs = _coords(m)
    x_comps = [sp.Float(m - lam - 1)] + [2 * sp.Float(lam) * x
                                         for x in xs[1:]]
    u = sp.Float(m - lam - 1) * xs[0] + sp.Float(lam) * sum(
        x ** 2 for x in xs[1:])
    return NonGradientWitness(
        flat=euclidean(m),
        warped=hyperbolic_warped(m),
        X=VectorField.from_sympy(xs, x_comps, name="X"),
        u=ScalarField.from_sympy(xs, u, name="u"),
        params={"m": m, "lam": float(lam)})


# ---------------------------------------------------------------------------
# Registry

_BUILDERS = {
    "euclidean": (euclidean, {"m"}),
    "hyperbolic-warped": (hyperbolic_warped, {"m"}),
    "round-sphere": (round_sphere, {"m", "r"}),
    "berger-sphere": (berger_sphere, {"kappa", "tau"}),
    "punctured-euclidean": (punctured_euclidean, {"n", "a", "theta", "lam"}),
    "berger-soliton": (berger_soliton, {"kappa", "tau"}),
    "warped-soliton": (warped_soliton, {"m", "lam", "n", "a", "b"}),
    "obata-sphere": (obata_sphere, {"m", "theta", "c1", "c2", "v", "w"}),
    "non-gradient-witness": (non_gradient_witness, {"m", "lam"}),
}


def names() -> list[str]:
    return sorted(_BUILDERS)


def build(name: str, **params):
    """Construct a catalog bundle by name.

    Raises ``LookupError`` for unknown names, ``ParameterError`` for
    rejected parameters (including unknown keys), and validates the
    bundle's basic invariants at 100 sampled points.
    """
    if name not in _BUILDERS:
        raise LookupError(
            f"unknown geometry {name!r}; available: {', '.join(names())}")
    fn, allowed = _BUILDERS[name]
    unknown = set(params) - allowed
    if unknown:
        raise ParameterError(
            f"unknown parameter(s) for {name!r}: {', '.join(sorted(unknown))}")
    bundle = fn(**params)
    _self_check(bundle)
    return bundle


def _self_check(bundle) -> None:
    """SPD metric and finite field values at 100 sampled points."""
    geoms = []
    if isinstance(bundle, GeometrySpec):
        geoms = [bundle]
    elif isinstance(bundle, SolitonData):
        geoms = [bundle.geometry]
    elif isinstance(bundle, NonGradientWitness):
        geoms = [bundle.flat, bundle.warped]
    for geom in geoms:
        pts = geom.sample(100)
        gv = geom.metric.value(pts)
        try:
            np.linalg.cholesky(gv)
        except np.linalg.LinAlgError as exc:
            raise ParameterError(
                f"metric of {geom.label} is not positive definite on the "
                "sampled domain") from exc
        asym = np.abs(gv - np.swapaxes(gv, -1, -2)).max()
        if asym != 0.0:
            raise ParameterError(
                f"metric of {geom.label} not exactly symmetric "
                f"(max asymmetry {asym:g})")
        for fname, fld in geom.fields.items():
            vals = fld.value(pts)
            if not np.isfinite(vals).all():
                raise ParameterError(
                    f"field {fname!r} of {geom.label} is not finite on "
                    "the sampled domain")
