"""Exception hierarchy shared by every module."""


class TrapChemError(Exception):
    """Base class for all package errors."""


class LayoutError(TrapChemError, ValueError):
    """Shapes, indices or layouts do not agree."""


class TruncationError(TrapChemError):
    """A Fock occupation or population reached the truncation boundary."""


class NormalizationError(TrapChemError):
    """A state vector is not normalized."""


class SymmetryError(TrapChemError, ValueError):
    """An operator that should be Hermitian (or symmetric) is not."""


class DomainError(TrapChemError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParseError(TrapChemError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(TrapChemError, ValueError):
    """Parsed data violate a declared invariant."""


class SamplingError(TrapChemError):
    """A sampled series is too short, too coarse or aliased."""


class WindowingError(SamplingError):
    """A correlation series has not decayed by the end of its time window."""


class ProtocolError(TrapChemError):
    """A measurement/simulation protocol precondition failed."""


class DegenerateError(ProtocolError):
    """A post-selection had (numerically) zero probability."""


class SaddlePointError(TrapChemError):
    """A fitted Hessian is not positive definite."""
