"""Pointwise tensor kernels on raw jet arrays.

These functions are pure array math: they take metric/field jets that a
caller has already evaluated (analytically, by finite differences, or
from grid data) and combine them with einsum contractions. All kernels
broadcast over arbitrary leading batch axes.

Index conventions follow :mod:`ricci_lab.fields`:

* ``g[..., i, j]``, ``dg[..., k, i, j] = d_k g_ij``,
  ``ddg[..., k, l, i, j] = d_k d_l g_ij``
* ``gamma[..., l, i, j]`` is the Christoffel symbol with upper index
  first, symmetric in ``(i, j)``
* ``dgamma[..., k, l, i, j] = d_k gamma^l_ij``
"""

from __future__ import annotations

import numpy as np


def cholesky_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix batch.

    Raises ``numpy.linalg.LinAlgError`` when any matrix in the batch is
    not positive-definite; callers translate that into a point-echoing
    error. No pseudo-inverse fallback is ever taken.
    """
    chol = np.linalg.cholesky(g)
    eye = np.broadcast_to(np.eye(g.shape[-1]), g.shape)
    li = np.linalg.solve(chol, eye)
    return np.einsum('...ki,...kj->...ij', li, li)


def christoffel(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Levi-Civita connection coefficients gamma^l_ij."""
    grads = (np.einsum('...ikj->...kij', dg)
             + np.einsum('...jik->...kij', dg)
             - dg)
    return 0.5 * np.einsum('...lk,...kij->...lij', ginv, grads)


def christoffel_derivative(ginv: np.ndarray, dg: np.ndarray,
                           ddg: np.ndarray) -> np.ndarray:
    """Coordinate derivatives d_k gamma^l_ij."""
    grads = (np.einsum('...ikj->...kij', dg)
             + np.einsum('...jik->...kij', dg)
             - dg)
    dginv = -np.einsum('...la,...kab,...bm->...klm', ginv, dg, ginv)
    dgrads = (np.einsum('...kimj->...kmij', ddg)
              + np.einsum('...kjim->...kmij', ddg)
              - ddg)
    return 0.5 * (np.einsum('...kln,...nij->...klij', dginv, grads)
                  + np.einsum('...ln,...knij->...klij', ginv, dgrads))


def ricci_from_connection(gamma: np.ndarray,
                          dgamma: np.ndarray) -> np.ndarray:
    """Ricci tensor from the connection and its first derivatives."""
    t1 = np.einsum('...kkij->...ij', dgamma)
    t2 = np.einsum('...ikkj->...ij', dgamma)
    t3 = np.einsum('...kkl,...lij->...ij', gamma, gamma)
    t4 = np.einsum('...kil,...lkj->...ij', gamma, gamma)
    return t1 - t2 + t3 - t4


def ricci(g: np.ndarray, dg: np.ndarray, ddg: np.ndarray) -> np.ndarray:
    """Ricci tensor straight from metric jets."""
    ginv = cholesky_inverse(g)
    gamma = christoffel(ginv, dg)
    dgamma = christoffel_derivative(ginv, dg, ddg)
    return ricci_from_connection(gamma, dgamma)


def scalar_curvature(ginv: np.ndarray, ric: np.ndarray) -> np.ndarray:
    return np.einsum('...ij,...ij->...', ginv, ric)


def hessian(ddf: np.ndarray, gamma: np.ndarray, df: np.ndarray) -> np.ndarray:
    """Covariant Hessian of a scalar from its coordinate jets."""
    return ddf - np.einsum('...kij,...k->...ij', gamma, df)


def lie_derivative_metric(g: np.ndarray, dg: np.ndarray, x: np.ndarray,
                          dx: np.ndarray) -> np.ndarray:
    """(L_X g)_ij for vector jets ``dx[..., i, k] = d_i X^k``."""
    t1 = np.einsum('...k,...kij->...ij', x, dg)
    t2 = np.einsum('...ik,...kj->...ij', dx, g)
    t3 = np.einsum('...jk,...ik->...ij', dx, g)
    return t1 + t2 + t3


def traceless(t: np.ndarray, g: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    m = g.shape[-1]
    tr = np.einsum('...ij,...ij->...', ginv, t)
    return t - (tr / m)[..., None, None] * g


def norm2_cov2(t: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Metric-raised squared Frobenius norm of a (0,2)-tensor."""
    return np.einsum('...ik,...jl,...ij,...kl->...', ginv, ginv, t, t)


def divergence_sym2(t: np.ndarray, dt: np.ndarray, gamma: np.ndarray,
                    ginv: np.ndarray) -> np.ndarray:
    """(div T)_j = g^{ik} (nabla_i T)_{kj} for a (0,2)-tensor."""
    cov = (dt
           - np.einsum('...lik,...lj->...ikj', gamma, t)
           - np.einsum('...lij,...kl->...ikj', gamma, t))
    return np.einsum('...ik,...ikj->...j', ginv, cov)


def divergence_vector(x: np.ndarray, dx: np.ndarray,
                      gamma: np.ndarray) -> np.ndarray:
    """div X = d_i X^i + gamma^i_ik X^k."""
    return (np.einsum('...ii->...', dx)
            + np.einsum('...iik,...k->...', gamma, x))


def tension(ginv_src: np.ndarray, gamma_src: np.ndarray,
            gamma_tgt_at_phi: np.ndarray, dphi: np.ndarray,
            ddphi: np.ndarray) -> np.ndarray:
    """Tension field of a map from source and target connection data."""
    t1 = np.einsum('...ij,...ijg->...g', ginv_src, ddphi)
    t2 = np.einsum('...ij,...kij,...kg->...g', ginv_src, gamma_src, dphi)
    t3 = np.einsum('...ij,...gab,...ia,...jb->...g',
                   ginv_src, gamma_tgt_at_phi, dphi, dphi)
    return t1 - t2 + t3


def pullback_metric(dpsi: np.ndarray, g_at_psi: np.ndarray) -> np.ndarray:
    return np.einsum('...ia,...jb,...ab->...ij', dpsi, dpsi, g_at_psi)


def pullback_oneform(dpsi: np.ndarray, w_at_psi: np.ndarray) -> np.ndarray:
    return np.einsum('...ia,...a->...i', dpsi, w_at_psi)


def sharp(w: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return np.einsum('...ij,...j->...i', ginv, w)


def flat(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.einsum('...ij,...j->...i', g, x)


def exterior_derivative_oneform(dw: np.ndarray) -> np.ndarray:
    """(dw)_ij = d_i w_j - d_j w_i from the jet ``dw[..., i, j]``."""
    return dw - np.swapaxes(dw, -1, -2)
