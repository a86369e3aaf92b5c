"""Exception types shared across the package."""


class NotHurwitzError(ValueError):
    """A computation needs a Hurwitz (exponentially stable) matrix."""


class RealizabilityError(ValueError):
    """Matrices fail the physical realizability identities."""


class SolverError(RuntimeError):
    """A numerical solver failed (as opposed to returning a negative verdict)."""


class InfeasibleError(RuntimeError):
    """A matrix inequality program has no solution at the requested level."""
