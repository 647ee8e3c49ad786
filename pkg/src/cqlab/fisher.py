"""Density functionals that single out the quantum coupling term.

Requiring the particle relations to survive only in the mean leaves the
field equations underdetermined up to an additive term L0 built from the
density.  The admissible L0 must integrate to zero against grad(rho),
and the simplest density-only solution

    L0 = B0 [ -(grad rho)^2 / (2 rho^2) + lap(rho) / rho ]

collapses, with B0 = hbar^2/4m and rho rewritten through its amplitude,
to the quantum kinetic correction (hbar^2/2m) lap(sqrt(rho))/sqrt(rho).
Its mean against rho is minus half the Fisher information times B0.
This module evaluates those functionals and the residuals of the two
identities; it verifies the given solution, it does not search for one.

Masked handling: each functional integrates only where the density sits
above the floor, renormalizes by the retained probability mass, and the
retained fraction is reported.  A mask swallowing more than half the
mass triggers a warning, not an error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SupportError, UnreliableFunctionalWarning
from .fields import ConfigDensity
from .grid import Grid, spectral_derivative, spectral_shift

__all__ = [
    "DensityFunctionalReport",
    "fisher_info",
    "entropy",
    "kl_divergence",
    "kl_shift",
    "l0_term",
    "verify_l0_conditions",
]


@dataclass(frozen=True)
class DensityFunctionalReport:
    """Functional values and identity residuals for one density."""

    fisher: float
    entropy: float
    l0_identity_residual: float
    constraint_residual: tuple[float, ...]
    retained_fraction: float

    def as_dict(self) -> dict:
        return {
            "fisher": self.fisher,
            "entropy": self.entropy,
            "l0_identity_residual": self.l0_identity_residual,
            "constraint_residual": list(self.constraint_residual),
            "retained_fraction": self.retained_fraction,
        }


def _floor_mask(rho: ConfigDensity, eps_rho: float):
    vals = rho.values
    mask = rho.valid & (vals > eps_rho * vals.max())
    retained = float(vals[mask].sum() * rho.grid.cell_measure)
    if retained < 0.5:
        warnings.warn(
            f"density floor masks {1 - retained:.2%} of the probability mass; "
            "functional values are unreliable",
            UnreliableFunctionalWarning,
            stacklevel=3,
        )
    return mask, retained


def _masked_quad(values: np.ndarray, mask: np.ndarray, grid: Grid) -> float:
    return float(values[mask].sum() * grid.cell_measure)


def fisher_info(rho: ConfigDensity, eps_rho: float = 1e-12) -> float:
    """I[rho] = integral rho * sum_k (d_k rho / rho)^2; zero iff constant."""
    grid = rho.grid
    mask, retained = _floor_mask(rho, eps_rho)
    total = 0.0
    for axis in range(grid.dim):
        d = spectral_derivative(rho.values, grid, axis=axis)
        integrand = np.zeros_like(d)
        np.divide(d * d, rho.values, out=integrand, where=mask)
        total += _masked_quad(integrand, mask, grid)
    return total / retained


def entropy(rho: ConfigDensity, eps_rho: float = 1e-12) -> float:
    """Differential entropy -integral rho ln rho (dimensionless convention)."""
    grid = rho.grid
    mask, retained = _floor_mask(rho, eps_rho)
    vals = rho.values
    integrand = np.zeros_like(vals)
    np.multiply(vals, np.log(vals, out=np.zeros_like(vals), where=mask),
                out=integrand, where=mask)
    return -_masked_quad(integrand, mask, grid) / retained


def kl_divergence(rho: ConfigDensity, chi: ConfigDensity, eps_rho: float = 1e-12) -> float:
    """Relative entropy -integral rho ln(rho/chi); non-positive by convexity.

    (The sign convention keeps the functional maximal, zero, at rho = chi.)
    """
    grid = rho.grid
    if chi.grid is not grid and chi.grid != grid:
        raise ValueError("densities live on different grids")
    mask, retained = _floor_mask(rho, eps_rho)
    if np.any(chi.values[mask] <= 0.0):
        raise SupportError("prior vanishes where the density does not; divergence undefined")
    ratio = np.ones_like(rho.values)
    np.divide(rho.values, chi.values, out=ratio, where=mask)
    integrand = np.zeros_like(rho.values)
    np.multiply(rho.values, np.log(ratio, out=np.zeros_like(ratio), where=mask),
                out=integrand, where=mask)
    return -_masked_quad(integrand, mask, grid) / retained


def kl_shift(rho: ConfigDensity, axis: int = 0, dq: float = 1e-3,
             eps_rho: float = 1e-12) -> float:
    """Relative entropy of rho against its own copy shifted by dq.

    The shift is spectral, so dq need not be a grid multiple.  For small
    dq this approaches -(dq)^2/2 times the per-axis Fisher information.
    """
    if dq == 0.0:
        return 0.0
    grid = rho.grid
    shifted = spectral_shift(rho.values, grid, axis=axis, delta=dq)
    chi = ConfigDensity(grid, np.maximum(shifted, 0.0), t=rho.t, norm_tol=1e-6)
    return kl_divergence(rho, chi, eps_rho=eps_rho)


def l0_term(rho: ConfigDensity, B0: float = 0.25,
            eps_rho: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """The additive term in both algebraic forms, NaN where masked.

    Returns (density form, amplitude form); the two are one algebraic
    identity and their pointwise agreement off-mask is asserted to 1e-8
    relative to the field scale.
    """
    grid = rho.grid
    mask, _ = _floor_mask(rho, eps_rho)
    vals = rho.values
    grad2 = 0.0
    lap = 0.0
    for axis in range(grid.dim):
        d = spectral_derivative(vals, grid, axis=axis)
        grad2 = grad2 + d * d
        lap = lap + spectral_derivative(vals, grid, axis=axis, order=2)
    rho_form = np.full_like(vals, np.nan)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        np.copyto(rho_form, B0 * (-grad2 / (2.0 * vals**2) + lap / vals), where=mask)

        amp = np.sqrt(np.maximum(vals, 0.0))
        lap_amp = 0.0
        for axis in range(grid.dim):
            lap_amp = lap_amp + spectral_derivative(amp, grid, axis=axis, order=2)
        sqrt_form = np.full_like(vals, np.nan)
        # B0 = hbar^2/4m makes hbar^2/2m = 2 B0
        np.copyto(sqrt_form, 2.0 * B0 * lap_amp / amp, where=mask)

    # the identity is checked on the noise-safe support: dividing by rho
    # far below the peak amplifies the spectral rounding floor past the
    # agreement tolerance without saying anything about the algebra
    safe = vals >= max(eps_rho, 1e-4) * vals.max()
    if safe.any():
        scale = max(1.0, float(np.max(np.abs(rho_form[safe]))))
        agreement = float(np.max(np.abs((rho_form - sqrt_form)[safe]))) / scale
        assert agreement < 1e-8, f"the two forms disagree by {agreement:.3e} (relative)"
    return rho_form, sqrt_form


def verify_l0_conditions(rho: ConfigDensity, B0: float = 0.25,
                         eps_rho: float = 1e-12) -> DensityFunctionalReport:
    """Residuals of the constraint and the Fisher identity for this density.

    constraint_residual[k] = | integral d_k rho * L0 |  (must vanish),
    l0_identity_residual   = | integral rho L0 + (B0/2) I[rho] |.
    """
    grid = rho.grid
    mask, retained = _floor_mask(rho, eps_rho)
    rho_form, _ = l0_term(rho, B0=B0, eps_rho=eps_rho)
    l0 = np.where(mask, rho_form, 0.0)
    constraint = []
    for axis in range(grid.dim):
        d = spectral_derivative(rho.values, grid, axis=axis)
        constraint.append(abs(_masked_quad(d * l0, mask, grid)))
    mean_l0 = _masked_quad(rho.values * l0, mask, grid) / retained
    identity = abs(mean_l0 + 0.5 * B0 * fisher_info(rho, eps_rho=eps_rho))
    return DensityFunctionalReport(
        fisher=fisher_info(rho, eps_rho=eps_rho),
        entropy=entropy(rho, eps_rho=eps_rho),
        l0_identity_residual=identity,
        constraint_residual=tuple(constraint),
        retained_fraction=retained,
    )
