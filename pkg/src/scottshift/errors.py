"""Exception types shared by the solvers and the command line."""


class ScottShiftError(Exception):
    """Base class; ``reason`` is a short machine-parsable tag."""

    reason = "error"


class InvalidArgument(ScottShiftError, ValueError):
    reason = "invalid-argument"


class DomainError(InvalidArgument):
    reason = "domain-error"


class CouplingTooLarge(InvalidArgument):
    reason = "coupling-too-large"

    def __init__(self, kappa):
        super().__init__(f"kappa exceeds critical value 2/pi (got {kappa!r})")
        self.kappa = kappa


class NoSolution(ScottShiftError, ValueError):
    reason = "no-solution"


class NumericalFailure(ScottShiftError, RuntimeError):
    reason = "numerical-failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class InternalConsistencyError(ScottShiftError, RuntimeError):
    reason = "internal-consistency"


class InvariantViolation(ScottShiftError, RuntimeError):
    reason = "invariant-violation"
