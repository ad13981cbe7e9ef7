"""Dephasing channels of qubits coupled to bosonic baths.

Submodules
----------
numerics
    Linear-algebra helpers (minimum-norm solves, trace norm, fidelity).
bath
    Bath specifications and the time-dependent channel coefficients.
kraus
    Kraus sets, Schur coefficient matrices and random-unitary decompositions.
focksim
    Truncated Fock-space simulation used as an independent oracle.
protocol
    Environment measurement and unitary restoration.
cli
    The ``dephase`` command.
"""

from .bath import BathSpec, DephasingCoefficients, Mode, dephasing_coefficients
from .errors import (
    BasisSearchFailed,
    CutoffTooSmall,
    DephaseError,
    DimensionMismatch,
    InfeasibleWeights,
    NotSquare,
    QuadratureNotConverged,
    RankDeficientInconsistent,
    SchemeUnavailable,
    SearchFailed,
    SingularSystem,
)
from .kraus import KrausSet, SchurMatrix, SignBasis

__all__ = [
    "BathSpec",
    "DephasingCoefficients",
    "Mode",
    "dephasing_coefficients",
    "KrausSet",
    "SchurMatrix",
    "SignBasis",
    "DephaseError",
    "DimensionMismatch",
    "NotSquare",
    "RankDeficientInconsistent",
    "QuadratureNotConverged",
    "InfeasibleWeights",
    "SingularSystem",
    "BasisSearchFailed",
    "SearchFailed",
    "CutoffTooSmall",
    "SchemeUnavailable",
]
__version__ = "0.1.0"
