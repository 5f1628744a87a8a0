"""Shared plumbing: error types, finite differences, thread control.

Everything here is deliberately small and dependency-free so the rest of
the package can assume a uniform evaluation contract: points are float
arrays whose last axis indexes chart coordinates, and every callable
broadcasts over arbitrary leading (batch) dimensions.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Central-difference steps; first derivatives use FD_STEP * max(1, |coord|),
# second derivatives use the coarser FD_STEP2 to balance truncation against
# round-off in the nested stencil.
FD_STEP = 1e-5
FD_STEP2 = 1e-4

# Points closer than this to a chart's singular locus are never sampled.
CHART_MARGIN = 1e-3

THREADS_ENV = "RICCI_LAB_THREADS"


class RicciLabError(Exception):
    """Base class for failures raised by this package."""


class MetricError(RicciLabError):
    """Metric matrix is not symmetric positive-definite where required."""


class ParameterError(RicciLabError):
    """A constructor parameter violates its documented inequality."""


class UnsupportedFieldError(RicciLabError):
    """An operation needs a derivative oracle the field does not carry."""


class WindowError(RicciLabError):
    """Requested time lies outside the validity window of a solution."""


class FlowAbort(RicciLabError):
    """The integrator detected a state-invariant breach and stopped."""


def thread_count() -> int:
    """Parallelism cap from the environment; defaults to 1."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Order-preserving map over ``items`` honouring the thread cap."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def stable_seed(label: str) -> int:
    """Deterministic 32-bit seed from a label, stable across processes."""
    return zlib.crc32(label.encode("utf-8")) & 0xFFFFFFFF


def fd_steps(p: np.ndarray, base: float) -> np.ndarray:
    """Per-coordinate steps scaled by coordinate magnitude."""
    return base * np.maximum(1.0, np.abs(p))


def _expand(a: np.ndarray, extra: int) -> np.ndarray:
    """Append ``extra`` singleton axes so ``a`` broadcasts over output axes."""
    return a.reshape(a.shape + (1,) * extra)


def fd_jacobian(fn, p, base: float = FD_STEP) -> np.ndarray:
    """Central-difference first derivatives of ``fn`` at ``p``.

    Parameters
    ----------
    fn : callable
        Maps points of shape ``batch + (m,)`` to arrays of shape
        ``batch + out``.
    p : array_like
        Evaluation points, shape ``batch + (m,)``.
    base : float
        Relative step size; the actual step along coordinate ``i`` is
        ``base * max(1, |p_i|)``.

    Returns
    -------
    ndarray
        Shape ``batch + (m,) + out``; entry ``[..., i, ...]`` is the
        partial derivative along coordinate ``i``, accurate to O(h^2).
    """
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    batch = p.shape[:-1]
    h = fd_steps(p, base)
    probe = np.asarray(fn(p), dtype=float)
    extra = probe.ndim - len(batch)
    cols = []
    for i in range(m):
        dp = np.zeros_like(p)
        dp[..., i] = h[..., i]
        diff = np.asarray(fn(p + dp), dtype=float) - np.asarray(fn(p - dp), dtype=float)
        cols.append(diff / _expand(2.0 * h[..., i], extra))
    return np.stack(cols, axis=len(batch))


def fd_hessian(fn, p, base: float = FD_STEP2) -> np.ndarray:
    """Central-difference second derivatives of ``fn`` at ``p``.

    Returns shape ``batch + (m, m) + out`` with entry ``[..., i, j, ...]``
    approximating the mixed partial along coordinates ``i`` and ``j``.
    The result is symmetric in ``(i, j)`` by construction.
    """
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    batch = p.shape[:-1]
    h = fd_steps(p, base)
    f0 = np.asarray(fn(p), dtype=float)
    extra = f0.ndim - len(batch)
    rows: list[list[np.ndarray]] = []
    for i in range(m):
        row: list[np.ndarray] = []
        for j in range(m):
            if j < i:
                row.append(rows[j][i])
                continue
            dpi = np.zeros_like(p)
            dpi[..., i] = h[..., i]
            if i == j:
                val = np.asarray(fn(p + dpi), dtype=float) - 2.0 * f0 \
                    + np.asarray(fn(p - dpi), dtype=float)
                val = val / _expand(h[..., i] ** 2, extra)
            else:
                dpj = np.zeros_like(p)
                dpj[..., j] = h[..., j]
                val = (np.asarray(fn(p + dpi + dpj), dtype=float)
                       - np.asarray(fn(p + dpi - dpj), dtype=float)
                       - np.asarray(fn(p - dpi + dpj), dtype=float)
                       + np.asarray(fn(p - dpi - dpj), dtype=float))
                val = val / _expand(4.0 * h[..., i] * h[..., j], extra)
            row.append(val)
        rows.append(row)
    stacked = [np.stack(r, axis=len(batch)) for r in rows]
    return np.stack(stacked, axis=len(batch))
