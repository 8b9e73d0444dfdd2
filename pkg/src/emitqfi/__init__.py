"""Quantum Fisher information of radiation emitted by Markovian open systems."""

from emitqfi.channel import KrausChannel, TransferSpectrum, discretize, random_channel, spectral_decompose, transfer_matrix
from emitqfi.errors import (
    DefectivePeripheralBlock,
    EmitQfiError,
    NonUniqueSteadyState,
    NumericalError,
    PsdBasisFailure,
    ValidationError,
)
from emitqfi.lindblad import LindbladModel, liouvillian, steady_state

__version__ = "0.1.0"

__all__ = [
    "DefectivePeripheralBlock",
    "EmitQfiError",
    "KrausChannel",
    "LindbladModel",
    "NonUniqueSteadyState",
    "NumericalError",
    "PsdBasisFailure",
    "TransferSpectrum",
    "ValidationError",
    "discretize",
    "liouvillian",
    "random_channel",
    "spectral_decompose",
    "steady_state",
    "transfer_matrix",
]
