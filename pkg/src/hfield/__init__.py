"""Hermite random fields: sampling, Wiener integrals, and the stochastic wave equation.

Subpackages are organized by concern:

- ``core``:     multi-index arithmetic, grids, rectangle increments, field I/O
- ``randgen``:  seeded Gaussian building blocks (white noise, fGn sheets, Hermite polynomials)
- ``hermite``:  the Hermite sheet itself (covariance, constants, two generators, verifiers)
- ``integral``: the integrand Hilbert space and Wiener integrals against a field
- ``wave``:     the linear stochastic wave equation driven by the sheet
- ``stats``:    occupation measures, local times, scaling regressions
- ``cli``:      command-line front end
"""

from hfield.core import (
    FieldRealization,
    GeneratorTag,
    GridSpec,
    HurstIndex,
    MultiIndex,
    generalized_increment,
    increment_over_rectangle,
    read_field,
    write_field,
)

__all__ = [
    "FieldRealization",
    "GeneratorTag",
    "GridSpec",
    "HurstIndex",
    "MultiIndex",
    "generalized_increment",
    "increment_over_rectangle",
    "read_field",
    "write_field",
]

__version__ = "0.1.0"
