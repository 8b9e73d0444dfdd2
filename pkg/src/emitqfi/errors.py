"""Exception hierarchy.

Validation problems (bad shapes, non-Hermitian inputs, out-of-range
parameters) are ``ValidationError``; failures of the numerics themselves
derive from ``NumericalError``.  The CLI maps them to exit codes 2 and 3.
"""


class EmitQfiError(Exception):
    """Base class for all package errors."""


class ValidationError(EmitQfiError, ValueError):
    """Input failed a structural or physical check."""


class NumericalError(EmitQfiError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class NonUniqueSteadyState(NumericalError):
    """A routine requiring a unique fixed point met a degenerate peripheral spectrum."""


class DefectivePeripheralBlock(NumericalError):
    """Peripheral eigenvalues with a nontrivial Jordan block."""


class PsdBasisFailure(NumericalError):
    """No positive semidefinite basis of the fixed left eigenspace was found."""
