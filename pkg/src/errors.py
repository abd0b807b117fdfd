from __future__ import annotations


class HJBError(Exception):
    """Base class for every error raised by the solver stack."""


class ConfigError(HJBError, ValueError):
    pass


class DomainError(HJBError, ValueError):
    pass


class SchemeAssemblyError(HJBError, ValueError):
    pass


class MissingBarrierError(HJBError, ValueError):
    pass


class NumericalError(HJBError, RuntimeError):
    """Failures of the discrete solve itself; the CLI maps these to exit code 1."""


class CFLViolationError(NumericalError):
    pass


class NonMonotoneSchemeError(NumericalError):
    pass


class PolicyIterationError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass
