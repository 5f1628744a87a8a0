"""Field descriptions with derivative oracles.

Every field is a bundle of closures: a component evaluator plus optional
analytic derivative closures up to the order the field advertises. When
an analytic closure is absent the field falls back to central finite
differences (see :mod:`ricci_lab.util`), unless constructed with
``allow_fd=False`` in which case the missing derivative is an error.

Index conventions for derivative arrays (batch axes elided):

==============  =========================  =============================
field            first derivative           second derivative
==============  =========================  =============================
ScalarField      ``d[i] = df/dx_i``         ``dd[i, j]``
MetricField      ``d[k, i, j] = dg_ij/dx_k``  ``dd[k, l, i, j]``
VectorField      ``d[i, k] = dX^k/dx_i``    --
OneFormField     ``d[i, j] = dw_j/dx_i``    --
SmoothMap        ``d[i, a] = dphi^a/dx_i``  ``dd[i, j, a]``
==============  =========================  =============================
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .util import (FD_STEP, FD_STEP2, UnsupportedFieldError, fd_hessian,
                   fd_jacobian)


def _as_batch(arr, batch: tuple, tail: tuple) -> np.ndarray:
    """Coerce a closure result to ``batch + tail``, broadcasting constants."""
    arr = np.asarray(arr, dtype=float)
    want = batch + tail
    if arr.shape != want:
        arr = np.broadcast_to(arr, want)
    return arr


def _lambdify_block(coords, exprs, tail: tuple):
    """Compile a flat list of sympy expressions into a batched evaluator.

    The returned closure maps points of shape ``batch + (m,)`` to arrays
    of shape ``batch + tail``. Constant expressions are broadcast.
    """
    flat = [sp.sympify(e) for e in exprs]
    fn = sp.lambdify(coords, flat, modules="numpy")

    def evaluate(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        batch = p.shape[:-1]
        args = [p[..., i] for i in range(len(coords))]
        vals = fn(*args)
        cols = [np.broadcast_to(np.asarray(v, dtype=float), batch) for v in vals]
        if cols:
            out = np.stack(cols, axis=-1)
        else:
            out = np.zeros(batch + (0,))
        return out.reshape(batch + tail)

    return evaluate


def _tensor_exprs(coords, exprs, orders: int):
    """Nested sympy derivative tables up to ``orders`` (1 or 2)."""
    base = [sp.sympify(e) for e in exprs]
    first = [[sp.diff(e, c) for e in base] for c in coords]
    tables = [base, [e for row in first for e in row]]
    if orders >= 2:
        second = [[sp.diff(e, c) for e in tables[1]] for c in coords]
        tables.append([e for row in second for e in row])
    return tables


class ScalarField:
    """Real-valued function on a chart with a two-jet oracle."""

    def __init__(self, fn, d=None, dd=None, *, allow_fd: bool = True,
                 name: str = "f"):
        self._fn = fn
        self._d = d
        self._dd = dd
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _as_batch(self._fn(p), p.shape[:-1], ())

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (p.shape[-1],))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"scalar field {self.name!r} carries no derivative oracle")
        return fd_jacobian(self.value, p, FD_STEP)

    def dd(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = p.shape[-1]
        if self._dd is not None:
            return _as_batch(self._dd(p), p.shape[:-1], (m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"scalar field {self.name!r} carries no second-order oracle")
        if self._d is not None:
            return fd_jacobian(self.d, p, FD_STEP)
        return fd_hessian(self.value, p, FD_STEP2)

    @classmethod
    def from_sympy(cls, coords, expr, name: str = "f") -> "ScalarField":
        m = len(coords)
        val, d1, d2 = _tensor_exprs(coords, [expr], 2)
        return cls(_lambdify_block(coords, val, ()),
                   _lambdify_block(coords, d1, (m,)),
                   _lambdify_block(coords, d2, (m, m)),
                   name=name)

    @classmethod
    def constant(cls, c: float, dim: int, name: str = "const") -> "ScalarField":
        def fn(p):
            return np.full(p.shape[:-1], float(c))

        def d(p):
            return np.zeros(p.shape[:-1] + (dim,))

        def dd(p):
            return np.zeros(p.shape[:-1] + (dim, dim))

        return cls(fn, d, dd, name=name)


class MetricField:
    """Symmetric positive-definite (0,2)-tensor with a two-jet oracle.

    Second derivatives fall back to one central difference of the
    analytic first-derivative closure when only the latter is present;
    this keeps the truncation error at O(FD_STEP^2) instead of the
    coarser nested-stencil error.
    """

    def __init__(self, dim: int, fn, d=None, dd=None, *,
                 allow_fd: bool = True, name: str = "g"):
        self.dim = dim
        self._fn = fn
        self._d = d
        self._dd = dd
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        return _as_batch(self._fn(p), p.shape[:-1], (m, m))

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (m, m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"metric {self.name!r} carries no derivative oracle")
        return fd_jacobian(self.value, p, FD_STEP)

    def dd(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._dd is not None:
            return _as_batch(self._dd(p), p.shape[:-1], (m, m, m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"metric {self.name!r} carries no second-order oracle")
        if self._d is not None:
            return fd_jacobian(self.d, p, FD_STEP)
        return fd_hessian(self.value, p, FD_STEP2)

    @classmethod
    def from_sympy(cls, coords, matrix, name: str = "g") -> "MetricField":
        m = len(coords)
        matrix = sp.Matrix(matrix)
        if matrix.shape != (m, m):
            raise ValueError("metric matrix shape does not match coordinates")
        if sp.simplify(matrix - matrix.T) != sp.zeros(m, m):
            raise ValueError("metric matrix must be exactly symmetric")
        entries = [matrix[i, j] for i in range(m) for j in range(m)]
        val, d1, d2 = _tensor_exprs(coords, entries, 2)
        return cls(m,
                   _lambdify_block(coords, val, (m, m)),
                   _lambdify_block(coords, d1, (m, m, m)),
                   _lambdify_block(coords, d2, (m, m, m, m)),
                   name=name)

    @classmethod
    def constant(cls, matrix, name: str = "g") -> "MetricField":
        matrix = np.asarray(matrix, dtype=float)
        m = matrix.shape[0]

        def fn(p):
            return np.broadcast_to(matrix, p.shape[:-1] + (m, m))

        def d(p):
            return np.zeros(p.shape[:-1] + (m, m, m))

        def dd(p):
            return np.zeros(p.shape[:-1] + (m, m, m, m))

        return cls(m, fn, d, dd, name=name)

    @classmethod
    def euclidean(cls, dim: int) -> "MetricField":
        return cls.constant(np.eye(dim), name="euclidean")


class VectorField:
    """Contravariant vector field; oracle order 1 (order 2 optional)."""

    def __init__(self, dim: int, fn, d=None, dd=None, *,
                 allow_fd: bool = True, name: str = "X"):
        self.dim = dim
        self._fn = fn
        self._d = d
        self._dd = dd
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _as_batch(self._fn(p), p.shape[:-1], (self.dim,))

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"vector field {self.name!r} carries no derivative oracle")
        return fd_jacobian(self.value, p, FD_STEP)

    def dd(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._dd is not None:
            return _as_batch(self._dd(p), p.shape[:-1], (m, m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"vector field {self.name!r} carries no second-order oracle")
        if self._d is not None:
            return fd_jacobian(self.d, p, FD_STEP)
        return fd_hessian(self.value, p, FD_STEP2)

    @classmethod
    def from_sympy(cls, coords, comps, name: str = "X") -> "VectorField":
        m = len(coords)
        if len(comps) != m:
            raise ValueError("component count does not match coordinates")
        val, d1, d2 = _tensor_exprs(coords, comps, 2)
        return cls(m,
                   _lambdify_block(coords, val, (m,)),
                   _lambdify_block(coords, d1, (m, m)),
                   _lambdify_block(coords, d2, (m, m, m)),
                   name=name)


class OneFormField:
    """Covariant 1-form field; oracle order 1."""

    def __init__(self, dim: int, fn, d=None, *, allow_fd: bool = True,
                 name: str = "w"):
        self.dim = dim
        self._fn = fn
        self._d = d
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _as_batch(self._fn(p), p.shape[:-1], (self.dim,))

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"one-form {self.name!r} carries no derivative oracle")
        return fd_jacobian(self.value, p, FD_STEP)

    @classmethod
    def from_sympy(cls, coords, comps, name: str = "w") -> "OneFormField":
        m = len(coords)
        if len(comps) != m:
            raise ValueError("component count does not match coordinates")
        val, d1 = _tensor_exprs(coords, comps, 1)
        return cls(m,
                   _lambdify_block(coords, val, (m,)),
                   _lambdify_block(coords, d1, (m, m)),
                   name=name)


class TensorField2:
    """Covariant rank-2 tensor with an optional derivative oracle.

    Divergence needs the derivative; a field built with ``d=None`` and
    ``allow_fd=False`` supports pointwise algebra only.
    """

    def __init__(self, dim: int, fn, d=None, *, symmetric: bool = False,
                 allow_fd: bool = True, name: str = "T"):
        self.dim = dim
        self._fn = fn
        self._d = d
        self.symmetric = symmetric
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        out = _as_batch(self._fn(p), p.shape[:-1], (m, m))
        return out

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m = self.dim
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (m, m, m))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"tensor field {self.name!r} carries no derivative oracle; "
                "divergence is unsupported")
        return fd_jacobian(self.value, p, FD_STEP)


class SmoothMap:
    """Map between charts with a two-jet oracle."""

    def __init__(self, dim_source: int, dim_target: int, fn, d=None, dd=None,
                 *, allow_fd: bool = True, name: str = "phi"):
        self.dim_source = dim_source
        self.dim_target = dim_target
        self._fn = fn
        self._d = d
        self._dd = dd
        self.allow_fd = allow_fd
        self.name = name

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _as_batch(self._fn(p), p.shape[:-1], (self.dim_target,))

    def d(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m, n = self.dim_source, self.dim_target
        if self._d is not None:
            return _as_batch(self._d(p), p.shape[:-1], (m, n))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"map {self.name!r} carries no derivative oracle")
        return fd_jacobian(self.value, p, FD_STEP)

    def dd(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        m, n = self.dim_source, self.dim_target
        if self._dd is not None:
            return _as_batch(self._dd(p), p.shape[:-1], (m, m, n))
        if not self.allow_fd:
            raise UnsupportedFieldError(
                f"map {self.name!r} carries no second-order oracle")
        if self._d is not None:
            return fd_jacobian(self.d, p, FD_STEP)
        return fd_hessian(self.value, p, FD_STEP2)

    @classmethod
    def from_sympy(cls, coords, comps, name: str = "phi") -> "SmoothMap":
        m = len(coords)
        n = len(comps)
        val, d1, d2 = _tensor_exprs(coords, comps, 2)
        return cls(m, n,
                   _lambdify_block(coords, val, (n,)),
                   _lambdify_block(coords, d1, (m, n)),
                   _lambdify_block(coords, d2, (m, m, n)),
                   name=name)

    @classmethod
    def identity(cls, dim: int) -> "SmoothMap":
        def fn(p):
            return np.asarray(p, dtype=float)

        def d(p):
            return np.broadcast_to(np.eye(dim), p.shape[:-1] + (dim, dim))

        def dd(p):
            return np.zeros(p.shape[:-1] + (dim, dim, dim))

        return cls(dim, dim, fn, d, dd, name="id")


# ---------------------------------------------------------------------------
# Scalar-field combinators. Jets combine by the usual calculus rules, so a
# derived field keeps analytic accuracy whenever its operands have it.

def scalar_add(u: ScalarField, v: ScalarField, name=None) -> ScalarField:
    return ScalarField(
        lambda p: u.value(p) + v.value(p),
        lambda p: u.d(p) + v.d(p),
        lambda p: u.dd(p) + v.dd(p),
        name=name or f"({u.name}+{v.name})")


def scalar_scale(u: ScalarField, c: float, name=None) -> ScalarField:
    c = float(c)
    return ScalarField(
        lambda p: c * u.value(p),
        lambda p: c * u.d(p),
        lambda p: c * u.dd(p),
        name=name or f"({c}*{u.name})")


def scalar_shift(u: ScalarField, c: float, name=None) -> ScalarField:
    c = float(c)
    return ScalarField(
        lambda p: u.value(p) + c,
        u.d, u.dd,
        name=name or f"({u.name}+{c})")


def scalar_mul(u: ScalarField, v: ScalarField, name=None) -> ScalarField:
    def dd(p):
        du, dv = u.d(p), v.d(p)
        cross = np.einsum('...i,...j->...ij', du, dv)
        return (u.dd(p) * v.value(p)[..., None, None]
                + v.dd(p) * u.value(p)[..., None, None]
                + cross + np.swapaxes(cross, -1, -2))

    return ScalarField(
        lambda p: u.value(p) * v.value(p),
        lambda p: (u.d(p) * v.value(p)[..., None]
                   + v.d(p) * u.value(p)[..., None]),
        dd,
        name=name or f"({u.name}*{v.name})")


def scalar_square(u: ScalarField, name=None) -> ScalarField:
    return scalar_mul(u, u, name=name or f"({u.name}^2)")


def scalar_exp(u: ScalarField, k: float = 1.0, name=None) -> ScalarField:
    """The field exp(k*u) with chain-rule jets."""
    k = float(k)

    def fn(p):
        return np.exp(k * u.value(p))

    def d(p):
        return k * fn(p)[..., None] * u.d(p)

    def dd(p):
        w = fn(p)[..., None, None]
        du = u.d(p)
        return w * (k * u.dd(p) + k * k * np.einsum('...i,...j->...ij', du, du))

    return ScalarField(fn, d, dd, name=name or f"exp({k}*{u.name})")


def scalar_log(u: ScalarField, name=None) -> ScalarField:
    """The field log(u); the caller guarantees u > 0 on the domain."""

    def d(p):
        return u.d(p) / u.value(p)[..., None]

    def dd(p):
        val = u.value(p)[..., None, None]
        du = u.d(p)
        return u.dd(p) / val - np.einsum('...i,...j->...ij', du, du) / val ** 2

    return ScalarField(lambda p: np.log(u.value(p)), d, dd,
                       name=name or f"log({u.name})")


# ---------------------------------------------------------------------------
# Composition and pullback builders with exact jet chain rules.

def compose_map(outer: SmoothMap, inner: SmoothMap, name=None) -> SmoothMap:
    """The map ``outer o inner`` with chain-rule jets."""
    if inner.dim_target != outer.dim_source:
        raise ValueError("dimension mismatch in map composition")

    def fn(p):
        return outer.value(inner.value(p))

    def d(p):
        q = inner.value(p)
        return np.einsum('...ia,...ag->...ig', inner.d(p), outer.d(q))

    def dd(p):
        q = inner.value(p)
        di, ddi = inner.d(p), inner.dd(p)
        do, ddo = outer.d(q), outer.dd(q)
        t1 = np.einsum('...ija,...ag->...ijg', ddi, do)
        t2 = np.einsum('...ia,...jb,...abg->...ijg', di, di, ddo)
        return t1 + t2

    return SmoothMap(inner.dim_source, outer.dim_target, fn, d, dd,
                     name=name or f"({outer.name}o{inner.name})")


def pullback_metric_field(psi: SmoothMap, g: MetricField,
                          name=None) -> MetricField:
    """The metric ``psi^* g`` with an analytic first-derivative closure.

    Second derivatives fall back to a central difference of the first
    derivative, which suffices for curvature at FD accuracy; callers that
    need exact curvature of a pullback should pull back through a sympy
    map instead.
    """
    if psi.dim_target != g.dim:
        raise ValueError("map target dimension does not match the metric")

    def fn(p):
        q = psi.value(p)
        dpsi = psi.d(p)
        return np.einsum('...ia,...jb,...ab->...ij', dpsi, dpsi, g.value(q))

    def d(p):
        q = psi.value(p)
        dpsi, ddpsi = psi.d(p), psi.dd(p)
        gq, dgq = g.value(q), g.d(q)
        t1 = np.einsum('...kia,...jb,...ab->...kij', ddpsi, dpsi, gq)
        t2 = np.einsum('...ia,...kjb,...ab->...kij', dpsi, ddpsi, gq)
        t3 = np.einsum('...ia,...jb,...kc,...cab->...kij',
                       dpsi, dpsi, dpsi, dgq)
        return t1 + t2 + t3

    return MetricField(psi.dim_source, fn, d, None,
                       name=name or f"({psi.name}^*{g.name})")


def metric_scale(g: MetricField, c: float, name=None) -> MetricField:
    c = float(c)
    return MetricField(
        g.dim,
        lambda p: c * g.value(p),
        lambda p: c * g.d(p),
        lambda p: c * g.dd(p),
        name=name or f"({c}*{g.name})")
