"""Gaussian wave packet transform - discrete Gaussian representations of wave packets.

This package provides analytic overlaps, summation curves, momentum quadrature
rules (TcM, RS, GH), reconstructions and error sweeps.
"""

from importlib.metadata import PackageNotFoundError, version

from .core.errors import WavePacketError
from .core.gaussian import (
    PhaseSpacePoint,
    WavePacket,
    WidthMatrix,
    evaluate,
    overlap,
    overlap_oracle,
    overlap_params,
    validate_width,
)
from .quadrature import CoefficientTable, MomentumGrid, coefficients, gh_grid, rs_grid, tcm_grid
from .reconstruction import (
    ErrorSweepRecord,
    Reconstruction,
    fit_rate,
    predicted_constants,
    reconstruct,
    semi_discrete_I,
    sup_error,
)
from .settings import Settings
from .summation import PositionGrid, SummationCurve, finite_grid, lattice_grid

try:
    __version__ = version("gwp-transform")
except PackageNotFoundError:
    __version__ = "0.1.0"

__all__ = [
    "CoefficientTable",
    "ErrorSweepRecord",
    "MomentumGrid",
    "PhaseSpacePoint",
    "PositionGrid",
    "Reconstruction",
    "Settings",
    "SummationCurve",
    "WavePacket",
    "WavePacketError",
    "WidthMatrix",
    "coefficients",
    "evaluate",
    "finite_grid",
    "fit_rate",
    "gh_grid",
    "lattice_grid",
    "overlap",
    "overlap_oracle",
    "overlap_params",
    "predicted_constants",
    "reconstruct",
    "rs_grid",
    "semi_discrete_I",
    "sup_error",
    "tcm_grid",
    "validate_width",
]
