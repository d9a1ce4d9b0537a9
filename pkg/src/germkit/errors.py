"""Exception hierarchy shared by every germkit module."""


class GermkitError(Exception):
    """Base class for all germkit failures."""


class DimensionError(GermkitError, ValueError):
    """Array sizes do not match the ambient symplectic space."""


class PreconditionError(GermkitError, ValueError):
    """An operation was called outside its domain (e.g. k >= n)."""


class RankError(GermkitError, ValueError):
    """A spanning set or gradient list is numerically dependent."""


class ContainmentError(GermkitError, ValueError):
    """A subspace expected to contain another one does not."""


class ConsistencyError(GermkitError, ValueError):
    """Input data violates a structural assumption (involution, invariance)."""


class InvarianceError(GermkitError):
    """An operator does not preserve the flag T(Lambda) in T(Sigma)."""


class SymplecticityError(GermkitError, ValueError):
    """A matrix that must be symplectic is not, within tolerance."""


class StabilityError(GermkitError):
    """An operator required to be stable is not."""


class CommutationError(GermkitError):
    """Operators that must commute do not, within tolerance."""


class KreinDegeneracyError(GermkitError):
    """The Krein form is degenerate where theory says it cannot be."""


class DivergenceError(GermkitError):
    """Non-finite values appeared during integration."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class LatticeError(GermkitError):
    """A period-lattice generator fails to return the base point."""


class ModelSpecError(GermkitError, ValueError):
    """A model specification is malformed; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        where = path or "<root>"
        if line is not None:
            where = f"{where} (line {line})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class RefusalError(GermkitError):
    """The request makes no sense for this input (no germ, or germ unique)."""
