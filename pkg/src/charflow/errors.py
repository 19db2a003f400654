"""Exception hierarchy shared by all charflow modules."""


class CharflowError(Exception):
    """Base class for every error raised by charflow."""


class DomainError(CharflowError, ValueError):
    """Evaluation outside the domain of a function (e.g. the origin)."""


class PreconditionError(CharflowError, ValueError):
    """An input violates a documented precondition."""


class StarShapednessError(CharflowError):
    """The gauge does not describe a strictly star-shaped hypersurface.

    ``witness`` holds the offending point when one is known.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class IntegrationError(CharflowError):
    """The ODE integrator could not complete (step-size underflow)."""


class NumericInstabilityError(CharflowError):
    """A structural invariant (symplecticity, spectrum symmetry) broke down."""


class BoundaryError(CharflowError):
    """A spectral quantity sits too close to a tolerance boundary to classify.

    ``gap`` is the distance that fell inside the ambiguous band.
    """

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ShootingError(CharflowError):
    """Newton shooting failed; ``residuals`` records the residual history."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class SectionError(ShootingError):
    """The flow is (nearly) tangent to the Poincare section."""


class CaseError(CharflowError, ValueError):
    """An operation received a normal-form case it does not support."""


class UnsupportedError(CharflowError):
    """The requested computation is outside what is implemented (e.g. n != 2)."""


class TableError(CharflowError, ValueError):
    """A critical-type-number table violates the admissibility rules."""


class IncompleteDossierError(CharflowError):
    """A dossier lacks a field needed for the requested check."""


class HypothesisError(CharflowError):
    """A global hypothesis of a check (e.g. no orbit with zero mean index) fails."""


class ConfigError(CharflowError, ValueError):
    """Malformed surface or run configuration."""


class StaleDatabaseError(CharflowError):
    """An artifact was produced for a different surface (hash mismatch)."""
