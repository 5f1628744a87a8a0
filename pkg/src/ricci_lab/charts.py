"""Coordinate charts and deterministic low-discrepancy sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .util import CHART_MARGIN, stable_seed

# Sampling box for charts whose coordinate range is all of R^m.
DEFAULT_BOX_HALF_WIDTH = 2.0


@dataclass(frozen=True)
class Chart:
    """A single coordinate chart with a box-shaped sampling domain.

    Parameters
    ----------
    dim : int
        Number of coordinates, at least 1.
    label : str
        Human-readable name; also seeds the default sampler.
    lo, hi : tuple of float, optional
        Coordinate box. ``None`` means the chart covers R^m and sampling
        uses a centred box of half-width :data:`DEFAULT_BOX_HALF_WIDTH`.
    margin : float
        Absolute clearance kept from the box faces when sampling. Charts
        with a singular locus on the boundary (Hopf polar angle, for
        instance) must keep this positive.
    predicate : callable, optional
        Extra membership test ``p -> bool array`` for non-box domains.
    """

    dim: int
    label: str
    lo: tuple | None = None
    hi: tuple | None = None
    margin: float = 0.0
    predicate: object = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be at least 1")

    def sample_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Sampling bounds with the margin already applied."""
        if self.lo is None or self.hi is None:
            half = DEFAULT_BOX_HALF_WIDTH
            lo = np.full(self.dim, -half)
            hi = np.full(self.dim, half)
        else:
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
        return lo + self.margin, hi - self.margin

    def contains(self, p) -> np.ndarray:
        """Membership test for points of shape ``(..., dim)``."""
        p = np.asarray(p, dtype=float)
        ok = np.isfinite(p).all(axis=-1)
        if self.lo is not None and self.hi is not None:
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            ok &= (p >= lo).all(axis=-1) & (p <= hi).all(axis=-1)
        if self.predicate is not None:
            ok &= np.asarray(self.predicate(p), dtype=bool)
        return ok

    def sample(self, count: int = 100, seed: int | None = None) -> np.ndarray:
        """Deterministic Halton sample of ``count`` in-domain points.

        The default seed is derived from the chart label, so repeated runs
        (and repeated processes) see the identical point set.
        """
        if seed is None:
            seed = stable_seed(self.label)
        lo, hi = self.sample_box()
        sampler = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        pts = qmc.scale(sampler.random(count), lo, hi)
        if self.predicate is not None:
            # Resample until the predicate is met; domains in the catalog
            # are box-shaped so this loop is a safety net, not a hot path.
            for _ in range(32):
                bad = ~np.asarray(self.predicate(pts), dtype=bool)
                if not bad.any():
                    break
                pts[bad] = qmc.scale(sampler.random(int(bad.sum())), lo, hi)
        return pts


def box_chart(dim: int, label: str, lo=None, hi=None, margin: float = 0.0,
              predicate=None) -> Chart:
    """Convenience constructor mirroring the :class:`Chart` fields."""
    lo_t = None if lo is None else tuple(np.broadcast_to(lo, (dim,)).tolist())
    hi_t = None if hi is None else tuple(np.broadcast_to(hi, (dim,)).tolist())
    return Chart(dim=dim, label=label, lo=lo_t, hi=hi_t, margin=margin,
                 predicate=predicate)


def hopf_chart(label: str = "hopf") -> Chart:
    """Chart (eta, xi1, xi2) on the 3-sphere minus the two Hopf circles.

    eta runs over (0, pi/2); the metric degenerates at the endpoints, so
    the standard chart margin keeps samples away from them.
    """
    return box_chart(3, label,
                     lo=(0.0, 0.0, 0.0),
                     hi=(np.pi / 2.0, 2.0 * np.pi, 2.0 * np.pi),
                     margin=CHART_MARGIN)
