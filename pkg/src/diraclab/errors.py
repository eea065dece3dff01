"""Exception taxonomy shared across the package."""


class DiraclabError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DiraclabError):
    """Malformed or inconsistent inputs (dimension mismatches, bad ranges)."""


class UnsupportedConfigError(DiraclabError):
    """Requested backend / dimension / feature combination is not supported."""


class ResourceLimitError(DiraclabError):
    """A configured size cap would be exceeded."""


class SolverFailureError(DiraclabError):
    """An iterative solver failed to converge after the allowed retries."""


class IllPosedError(DiraclabError):
    """Resolvent probe requested at (or too close to) a spectral point."""


class IncompleteProjectorError(DiraclabError):
    """Spectral window was not fully resolved; projector would be wrong."""


class PreconditionError(DiraclabError):
    """An estimator precondition (stated in its contract) does not hold."""


class DegeneratePotentialError(DiraclabError):
    """Coupling probe got a numerically zero potential."""


class InsufficientDataError(DiraclabError):
    """Not enough usable data points for a fit."""


class SchemaError(DiraclabError):
    """Config or CSV does not match the declared schema."""
