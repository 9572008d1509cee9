"""Exception types raised by the numerical routines."""


class CVTeleportError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CVTeleportError, ValueError):
    """A parameter lies outside the domain where the formula is defined."""


class TailMassExceeded(CVTeleportError):
    """The truncated Fock space drops more probability mass than allowed.

    Raised when ``dim`` is too small for the photon numbers involved.
    """

    def __init__(self, tail_mass, tail_tol, dim):
        self.tail_mass = tail_mass
        self.tail_tol = tail_tol
        self.dim = dim
        super().__init__(
            f"tail mass {tail_mass:.3e} above level {dim} exceeds tolerance {tail_tol:.3e}; "
            "increase the truncation dimension"
        )


class NotHermitian(CVTeleportError, ValueError):
    pass


class DimMismatch(CVTeleportError, ValueError):
    pass


class ConvergenceFailure(CVTeleportError, RuntimeError):
    """A refinement ladder hit its ceiling without converging."""
