"""cqlab: a numerical laboratory for the classical-to-quantum ladder.

Three dynamical tiers of the same system are implemented and
cross-verified against each other:

  * phase-space ensembles (canonical flow, density transport, action
    transport) — globally valid;
  * their projection onto configuration space (momentum fields,
    Hamilton-Jacobi + continuity by characteristics) — valid up to the
    first caustic, which is detected and reported;
  * wave-function dynamics (linear, and the nonlinear variant whose
    Madelung fields reproduce the projected tier), with the
    Fisher-information functionals and circulation/winding diagnostics
    that connect the tiers.
"""

from .grid import Grid, PhaseGrid, NumericsConfig, spectral_derivative, quadrature
from .hamiltonian import Hamiltonian, Potential, velocity_map, force, lagrangian
from .fields import ConfigAction, ConfigDensity, MomentumField, CausticReport

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "PhaseGrid",
    "NumericsConfig",
    "spectral_derivative",
    "quadrature",
    "Hamiltonian",
    "Potential",
    "velocity_map",
    "force",
    "lagrangian",
    "ConfigAction",
    "ConfigDensity",
    "MomentumField",
    "CausticReport",
    "__version__",
]
