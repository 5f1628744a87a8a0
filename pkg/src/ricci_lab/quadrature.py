"""Product quadrature rules on round spheres, expressed in chart points.

The rules integrate against the exact surface measure, so no metric
determinant enters downstream: ``integrate(rule, f)`` is just a weighted
sum of chart-point values. Node placement keeps every point strictly
inside the stereographic chart (the pole the chart misses is never a
node of the open-interval polar rules).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_chebyu, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    """Chart-coordinate nodes with surface-measure weights."""

    points: np.ndarray
    weights: np.ndarray
    label: str
    order: int

    @property
    def count(self) -> int:
        return self.points.shape[0]


def _trapezoid_circle(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform rule on [0, 2 pi); exact for trig polynomials < count."""
    phi = np.arange(count) * (2.0 * np.pi / count)
    return phi, np.full(count, 2.0 * np.pi / count)


def _chart_from_embedding(p: np.ndarray, r: float) -> np.ndarray:
    """Stereographic coordinates x = r p_{1:m} / (r - p_{m+1})."""
    return r * p[..., :-1] / (r - p[..., -1:])


def sphere_rule(m: int, order: int, r: float = 1.0) -> QuadratureRule:
    """Product rule on the round m-sphere of radius r, m in {2, 3}.

    * m = 2: Gauss-Legendre in the polar cosine, uniform in azimuth.
    * m = 3: Gauss-Chebyshev (second kind) in the outer polar cosine,
      absorbing the sqrt(1 - u^2) measure factor exactly, then the
      2-sphere product rule on the inner angles.

    Both integrate polynomial expressions in the embedding coordinates
    of degree below roughly 2 * order exactly, which covers every
    closed-form moment the verification integrals need.
    """
    if m not in (2, 3):
        raise ValueError(f"sphere quadrature supports m in {{2, 3}}, got {m}")
    if order < 2:
        raise ValueError(f"order must be at least 2, got {order}")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    k = max(4, 2 * order)
    phi, w_phi = _trapezoid_circle(k)
    u, w_u = roots_legendre(order)
    if m == 2:
        uu, pp = np.meshgrid(u, phi, indexing="ij")
        ww = np.multiply.outer(w_u, w_phi)
        s = np.sqrt(1.0 - uu ** 2)
        emb = r * np.stack([s * np.cos(pp), s * np.sin(pp), uu], axis=-1)
        weights = (r ** 2) * ww
    else:
        c, w_c = roots_chebyu(order)
        cc, uu, pp = np.meshgrid(c, u, phi, indexing="ij")
        ww = np.multiply.outer(np.multiply.outer(w_c, w_u), w_phi)
        s_out = np.sqrt(1.0 - cc ** 2)
        s_in = np.sqrt(1.0 - uu ** 2)
        emb = r * np.stack([s_out * s_in * np.cos(pp),
                            s_out * s_in * np.sin(pp),
                            s_out * uu,
                            cc], axis=-1)
        weights = (r ** 3) * ww
    pts = _chart_from_embedding(emb.reshape(-1, m + 1), r)
    return QuadratureRule(points=pts, weights=weights.reshape(-1),
                          label=f"sphere(m={m},order={order},r={r})",
                          order=order)


def integrate(rule: QuadratureRule, values) -> float:
    """Weighted sum; ``values`` is an array of node values or a callable
    (a scalar field or plain function of the node block)."""
    if callable(values):
        values = values(rule.points)
    elif hasattr(values, "value"):
        values = values.value(rule.points)
    values = np.asarray(values, dtype=float)
    if values.shape != (rule.count,):
        raise ValueError(
            f"integrand produced shape {values.shape}, expected "
            f"({rule.count},)")
    return float(np.dot(rule.weights, values))
