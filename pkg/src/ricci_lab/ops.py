"""Pointwise differential-geometry operations on field descriptions.

Each operation evaluates the needed jets through the fields' derivative
oracles and delegates the tensor algebra to :mod:`ricci_lab.jets`.
Points may be single chart points of shape ``(m,)`` or batches of shape
``(..., m)``; outputs carry the same leading shape.
"""

from __future__ import annotations

import numpy as np

from . import jets
from .fields import (MetricField, OneFormField, ScalarField, SmoothMap,
                     TensorField2, VectorField)
from .util import FD_STEP, MetricError, fd_jacobian


def _prep(p):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    return (p[None, :] if single else p), single


def _post(out, single):
    return out[0] if single else out


def metric_inverse(g: MetricField, p) -> np.ndarray:
    """Inverse metric via Cholesky; non-SPD input raises with the point."""
    pts, single = _prep(p)
    gv = g.value(pts)
    try:
        ginv = jets.cholesky_inverse(gv)
    except np.linalg.LinAlgError:
        flat_pts = pts.reshape(-1, pts.shape[-1])
        flat_g = gv.reshape(-1, *gv.shape[-2:])
        for q, mat in zip(flat_pts, flat_g):
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise MetricError(
                    f"metric {g.name!r} is not positive-definite at point "
                    f"{np.array2string(q, precision=6)}") from None
        raise
    return _post(ginv, single)


def christoffel(g: MetricField, p) -> np.ndarray:
    """Connection coefficients gamma^l_ij at ``p``."""
    pts, single = _prep(p)
    ginv = jets.cholesky_inverse(_checked_metric(g, pts))
    return _post(jets.christoffel(ginv, g.d(pts)), single)


def _checked_metric(g: MetricField, pts) -> np.ndarray:
    gv = g.value(pts)
    try:
        np.linalg.cholesky(gv)
    except np.linalg.LinAlgError:
        # Re-run through metric_inverse for the point-echoing error path.
        metric_inverse(g, pts)
    return gv


def ricci(g: MetricField, p) -> np.ndarray:
    """Ricci tensor of ``g`` at ``p`` (convention: round sphere positive)."""
    pts, single = _prep(p)
    gv = _checked_metric(g, pts)
    return _post(jets.ricci(gv, g.d(pts), g.dd(pts)), single)


def scalar_curvature(g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    gv = _checked_metric(g, pts)
    ginv = jets.cholesky_inverse(gv)
    ric = jets.ricci(gv, g.d(pts), g.dd(pts))
    return _post(jets.scalar_curvature(ginv, ric), single)


def grad_scalar_curvature(g: MetricField, p) -> np.ndarray:
    """Gradient (vector) of the scalar curvature, via central differences.

    Third metric derivatives are outside the oracle contract, so dS is
    always finite-differenced; with analytic two-jets the error is
    O(FD_STEP^2) on the curvature scale.
    """
    pts, single = _prep(p)
    ds = fd_jacobian(lambda q: scalar_curvature(g, q), pts, FD_STEP)
    ginv = metric_inverse(g, pts)
    return _post(jets.sharp(ds, ginv), single)


def lie_derivative_metric(x: VectorField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    lie = jets.lie_derivative_metric(g.value(pts), g.d(pts),
                                     x.value(pts), x.d(pts))
    return _post(lie, single)


def hessian_scalar(f: ScalarField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    gamma = jets.christoffel(jets.cholesky_inverse(_checked_metric(g, pts)),
                             g.d(pts))
    return _post(jets.hessian(f.dd(pts), gamma, f.d(pts)), single)


def laplacian_scalar(f: ScalarField, g: MetricField, p) -> np.ndarray:
    """Trace of the Hessian (so height functions on the unit sphere have
    negative eigenvalues)."""
    pts, single = _prep(p)
    ginv = jets.cholesky_inverse(_checked_metric(g, pts))
    gamma = jets.christoffel(ginv, g.d(pts))
    hess = jets.hessian(f.dd(pts), gamma, f.d(pts))
    return _post(np.einsum('...ij,...ij->...', ginv, hess), single)


def gradient(f: ScalarField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    ginv = jets.cholesky_inverse(_checked_metric(g, pts))
    return _post(jets.sharp(f.d(pts), ginv), single)


def traceless(t: TensorField2, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    gv = g.value(pts)
    ginv = jets.cholesky_inverse(gv)
    return _post(jets.traceless(t.value(pts), gv, ginv), single)


def divergence_sym2(t: TensorField2, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    ginv = jets.cholesky_inverse(_checked_metric(g, pts))
    gamma = jets.christoffel(ginv, g.d(pts))
    div = jets.divergence_sym2(t.value(pts), t.d(pts), gamma, ginv)
    return _post(div, single)


def divergence_vector(x: VectorField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    gamma = jets.christoffel(jets.cholesky_inverse(_checked_metric(g, pts)),
                             g.d(pts))
    return _post(jets.divergence_vector(x.value(pts), x.d(pts), gamma),
                 single)


def tension_field(phi: SmoothMap, g: MetricField, h: MetricField,
                  p) -> np.ndarray:
    """Tension of ``phi: (M, g) -> (N, h)`` at source points ``p``."""
    if phi.dim_source != g.dim or phi.dim_target != h.dim:
        raise ValueError("map dimensions do not match the metrics")
    pts, single = _prep(p)
    ginv = jets.cholesky_inverse(_checked_metric(g, pts))
    gamma_src = jets.christoffel(ginv, g.d(pts))
    q = phi.value(pts)
    gamma_tgt = jets.christoffel(jets.cholesky_inverse(h.value(q)), h.d(q))
    tau = jets.tension(ginv, gamma_src, gamma_tgt, phi.d(pts), phi.dd(pts))
    return _post(tau, single)


def pullback_metric(psi: SmoothMap, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    return _post(jets.pullback_metric(psi.d(pts), g.value(psi.value(pts))),
                 single)


def pullback_oneform(psi: SmoothMap, w: OneFormField, p) -> np.ndarray:
    pts, single = _prep(p)
    return _post(jets.pullback_oneform(psi.d(pts), w.value(psi.value(pts))),
                 single)


def sharp(w: OneFormField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    return _post(jets.sharp(w.value(pts), metric_inverse(g, pts)), single)


def flat(x: VectorField, g: MetricField, p) -> np.ndarray:
    pts, single = _prep(p)
    return _post(jets.flat(x.value(pts), g.value(pts)), single)


def exterior_derivative_oneform(w: OneFormField, p) -> np.ndarray:
    pts, single = _prep(p)
    return _post(jets.exterior_derivative_oneform(w.d(pts)), single)


def ricci_tensor_field(g: MetricField, *, allow_fd: bool = True) -> TensorField2:
    """The Ricci tensor of ``g`` packaged as a differentiable field.

    Its derivative oracle is a central difference over the pointwise
    Ricci evaluation, which is what the contracted-Bianchi check needs.
    """
    return TensorField2(
        g.dim,
        lambda p: ricci(g, p),
        None,
        symmetric=True,
        allow_fd=allow_fd,
        name=f"Ric({g.name})")


def musical_flat_field(x: VectorField, g: MetricField) -> OneFormField:
    """The one-form g(X, .) with a finite-difference derivative oracle."""
    return OneFormField(
        g.dim,
        lambda p: jets.flat(x.value(p), g.value(p)),
        None,
        name=f"{x.name}^flat")
