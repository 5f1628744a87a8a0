"""Coordinate-chart tensor calculus with a geometric-flow test bench.

The layers, bottom up: ``fields`` wraps scalar/vector/form/metric/map
data with 2-jet evaluation, ``jets`` holds the batched index kernels,
``ops`` exposes curvature and musical operators on fields, ``catalog``
builds named geometries and soliton structures, ``quadrature`` gives
exact product rules on spheres, ``verify`` turns identities into
residual reports, ``flow`` runs the coupled flow (reference solutions
and a grid integrator), and ``cli``/``report``/``figures`` render runs
to JSON, CSV, and image files.
"""

__version__ = "0.1.0"

from .util import (FlowAbort, MetricError, ParameterError, RicciLabError,
                   UnsupportedFieldError, WindowError)
from .fields import (MetricField, OneFormField, ScalarField, SmoothMap,
                     VectorField)
from . import catalog, flow, jets, ops, quadrature, verify
from .verify import ResidualReport, verify_suite

__all__ = [
    "__version__",
    "FlowAbort", "MetricError", "ParameterError", "RicciLabError",
    "UnsupportedFieldError", "WindowError",
    "MetricField", "OneFormField", "ScalarField", "SmoothMap",
    "VectorField",
    "catalog", "flow", "jets", "ops", "quadrature", "verify",
    "ResidualReport", "verify_suite",
]
