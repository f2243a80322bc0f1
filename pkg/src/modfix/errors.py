"""Exception hierarchy shared by all modules."""


class ModfixError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(ModfixError, ValueError):
    """An argument violates a documented precondition (usage error)."""


class DimensionMismatchError(PreconditionError):
    def __init__(self, expected, got):
        super().__init__(f"dimension mismatch: modular has dimension {expected}, element has {got}")
        self.expected = expected
        self.got = got


class ModularOverflowError(ModfixError, ArithmeticError):
    """The modular evaluated to +inf or nan."""


class DomainViolationError(ModfixError):
    """A mapping produced a point outside its declared domain."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class CertificationError(ModfixError):
    """An empirical certificate could not be issued.

    ``witness`` carries whatever made the certificate fail, typically a
    pair of points and the offending ratio.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SolverError(ModfixError):
    """A solver rejected its input or gave up for a mathematical reason.

    ``trace`` holds whatever partial trace was produced, so callers can
    still write it out.
    """

    def __init__(self, message, trace=None, info=None):
        super().__init__(message)
        self.trace = trace
        self.info = info or {}


class OracleError(ModfixError):
    """A brute-force oracle cannot produce a unique fixed point."""
