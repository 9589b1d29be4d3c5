"""Exception hierarchy.

Every failure raised by the library derives from :class:`CovselError`. The
``exit_code`` attribute is what the CLI returns when the error escapes a
command (2 validation, 3 infeasibility, 4 numerical failure).
"""

from __future__ import annotations


class CovselError(Exception):
    exit_code = 1


class ValidationError(CovselError, ValueError):
    """Input violates a type invariant or an operation precondition."""

    exit_code = 2


class PreconditionViolated(ValidationError):
    pass


class InfeasibilityError(CovselError):
    exit_code = 3


class EpsilonInfeasible(InfeasibilityError):
    """The deviation level is not in (0, 1): too few samples for this rho."""


class RhoInfeasible(InfeasibilityError):
    """No dominance constant (or not the requested one) works for this distribution."""


class Undetectable(InfeasibilityError):
    pass


class AllInfeasible(InfeasibilityError):
    pass


class NoFeasibleCandidate(InfeasibilityError):
    pass


class NoSolution(InfeasibilityError):
    pass


class NumericalError(CovselError, ArithmeticError):
    exit_code = 4


class NonConvergent(NumericalError):
    pass


class Diverging(NumericalError):
    pass


class NumericalTrouble(NumericalError):
    pass
