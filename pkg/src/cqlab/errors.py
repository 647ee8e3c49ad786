"""Exception types shared across the solvers."""


class CqlabError(Exception):
    """Base class for all package errors."""


class GridError(CqlabError):
    """Invalid grid configuration (non-power-of-two size, bad extent...)."""


class ScenarioError(CqlabError):
    """Scenario file failed validation; message names the offending key."""


class NumericalBlowupError(CqlabError):
    """A state or field stopped being finite during integration."""


class CausticError(CqlabError):
    """An operation was requested at or beyond the first caustic time."""


class AdvectionError(CqlabError):
    """A contour vertex left the region where the velocity is evaluable."""


class CirculationUndefinedError(CqlabError):
    """The contour intersects a region where the field is masked out."""


class WindingUnreliableError(CqlabError):
    """Accumulated phase around the contour is too far from an integer."""


class SingularAmplitudeError(CqlabError):
    """|psi|^2 fell below the density floor on an unmasked region."""


class BlowupReport(CqlabError):
    """Nonlinear wave evolution exceeded its growth bound.

    Carries the time and magnitude at which the run was aborted; the
    nonlinear equation is only locally valid and the abort is reported,
    not suppressed.
    """

    def __init__(self, t: float, magnitude: float, bound: float):
        self.t = t
        self.magnitude = magnitude
        self.bound = bound
        super().__init__(
            f"nonlinear term reached |T_Q| = {magnitude:.3e} > bound {bound:.3e} "
            f"at t = {t:.6g}; solution no longer globally valid"
        )


class SupportError(CqlabError):
    """Divergence undefined: the prior vanishes where the density does not."""


class UnreliableFunctionalWarning(UserWarning):
    """More than half of the probability mass sits below the density floor."""
