"""Exception hierarchy for sludgesim.

Three families, matching the CLI exit-code contract:

* :class:`ModelError` / :class:`ConfigError` -- bad inputs (exit code 2),
* :class:`NumericalError` -- a computation that cannot proceed or did not
  converge (exit code 3),
* plain :class:`OSError` from the standard library -- I/O failures (exit 4).
"""

from __future__ import annotations


class SludgesimError(Exception):
    """Base class for all package-specific errors."""


# ---------------------------------------------------------------------------
# model construction / validation
# ---------------------------------------------------------------------------

class ModelError(SludgesimError, ValueError):
    """A model parameter set violates an invariant."""


class NonPositiveParameter(ModelError):
    """A parameter that must be positive (or nonnegative) is not."""


class GeneratorRowSumNonzero(ModelError):
    """A switching-rate matrix row does not sum to zero."""


class GeneratorNotIrreducible(ModelError):
    """The switching-rate graph is not strongly connected."""


class DimensionMismatch(ModelError):
    """Generator size and regime count disagree."""


class InvalidModel(ModelError):
    """Raised by ``validate``; carries every violated invariant.

    Attributes:
        violations: tuple of specific ModelError instances, one per problem.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} invariant violation(s): {lines}")


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

class ConfigError(SludgesimError, ValueError):
    """A run-configuration document is unusable."""


class ConfigSyntaxError(ConfigError):
    """Malformed document text; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemaError(ConfigError):
    """A well-formed document with a missing, unknown, or ill-typed key.

    Attributes:
        key: bare name of the offending key; the message carries the full
            dotted path.
    """

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"config schema violation at key {key!r}")


# ---------------------------------------------------------------------------
# numerical / runtime failures
# ---------------------------------------------------------------------------

class NumericalError(SludgesimError, RuntimeError):
    """A computation failed or its preconditions do not hold."""


class StepTooLargeForRates(NumericalError):
    """dt times the total switching rate out of a state is too large."""


class NonFiniteState(NumericalError):
    """The integrator produced NaN/inf (dt too large for the coefficients).

    Attributes:
        step: index of the offending step, when known.
    """

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class RequiresSingleRegime(NumericalError):
    """A closed-form operation was asked of a switching (m0 > 1) model."""


class DegenerateNoise(NumericalError):
    """An operation requiring sigma1 > 0 got a noise-free substrate equation."""


class QuadratureNonConvergence(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NoSignChange(NumericalError):
    """A root-finding bracket does not satisfy lambda(lo) < 0 < lambda(hi)."""


class MCInconclusive(NumericalError):
    """A Monte Carlo sign test stayed within 3 standard errors of zero."""


class BiomassHitZero(NumericalError):
    """ln X is undefined because a trajectory contains X = 0."""


class HorizonTooShort(NumericalError):
    """A trajectory is too short for the requested estimate."""


class InvalidMomentExponent(NumericalError):
    """The requested moment exponent exceeds the bounded-moment range."""


class EmptyAfterBurnIn(NumericalError):
    """No samples remain once the burn-in window is discarded."""
