"""Shared fixtures: catalog bundles reused across test modules."""

import numpy as np
import pytest
import sympy as sp

from ricci_lab import catalog
from ricci_lab.fields import MetricField


@pytest.fixture(scope="session")
def sphere2():
    return catalog.round_sphere(2, 1.0)


@pytest.fixture(scope="session")
def sphere3():
    return catalog.round_sphere(3, 1.0)


@pytest.fixture(scope="session")
def warped22():
    return catalog.warped_soliton(2, -2.0)


@pytest.fixture(scope="session")
def obata2():
    return catalog.obata_sphere(2)


@pytest.fixture(scope="session")
def berger92():
    return catalog.berger_soliton(9.0, 2.0)


def sample(geom, count=60, seed=None):
    return geom.chart.sample(count, seed)


def bumpy_metric():
    """SPD 3-metric with off-diagonal terms and no Killing fields."""
    xs = sp.symbols("x1:4", real=True)
    x1, x2, x3 = xs
    g = sp.Matrix([
        [1 + sp.Rational(1, 5) * x2 ** 2, sp.Rational(1, 10) * x1 * x2, 0],
        [sp.Rational(1, 10) * x1 * x2, 1 + sp.Rational(1, 5) * x1 ** 2,
         sp.Rational(1, 20) * x3],
        [0, sp.Rational(1, 20) * x3, 1 + sp.Rational(1, 10) * x3 ** 2],
    ])
    return MetricField.from_sympy(xs, g, name="bumpy"), xs


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
