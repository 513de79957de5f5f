"""Exception types shared across the package."""


class MarkovSphereError(Exception):
    """Base class for all package errors."""


class InvalidPointError(MarkovSphereError):
    """A sphere point has a non-finite or otherwise unusable coordinate."""


class InvalidMapError(MarkovSphereError):
    """A rational map violates its contract (degree, coprimality, 0/0)."""


class SchemaError(MarkovSphereError):
    """A system description document does not match the expected schema."""


class StochasticityError(SchemaError):
    """Edge weights out of a vertex do not sum to one."""


class IrreducibilityError(SchemaError):
    """The directed graph of the system is not strongly connected."""


class NumericFailure(MarkovSphereError):
    """A numerical routine failed to converge.

    ``partial`` carries whatever results were obtained before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class UnsupportedOperationError(MarkovSphereError):
    """The operation is not defined for this system (e.g. non-polynomial)."""


class SeedFailureError(MarkovSphereError):
    """No usable starting point (e.g. repelling fixed point) was found."""


class BudgetExceededError(MarkovSphereError):
    """A work budget (word/box pairs, rounds) was exhausted."""


class ResolutionError(MarkovSphereError):
    """Results are inconsistent at the requested resolution.

    Carries diagnostic data in ``details`` when available.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details
