"""Configuration-space field containers shared by the projected tiers.

A field is grid samples plus a time stamp and an optional validity mask
(True where the value is defined).  Masks appear in two places: where a
characteristics rebuild has no data (uncovered nodes) and where a density
falls below the floor eps_rho so that the phase is undefined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, quadrature

__all__ = ["ConfigDensity", "ConfigAction", "MomentumField", "CausticReport", "masked_max_abs"]


def _check_mask(mask, shape):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} != field shape {shape}")
    return mask


@dataclass(frozen=True)
class ConfigDensity:
    """rho(q, t) >= 0 on a configuration grid, normalized to one."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    mask: np.ndarray | None = None
    norm_tol: float = 1e-8

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", _check_mask(self.mask, values.shape))
        if values.shape != self.grid.shape:
            raise ValueError(f"density shape {values.shape} != grid shape {self.grid.shape}")
        if values.min() < -1e-10:
            raise ValueError(f"density has negative samples down to {values.min():.3e}")
        total = quadrature(values, self.grid)
        if abs(total - 1.0) > self.norm_tol:
            raise ValueError(f"density normalizes to {total!r}, outside tolerance {self.norm_tol}")

    @property
    def valid(self) -> np.ndarray:
        return np.ones(self.values.shape, bool) if self.mask is None else self.mask


@dataclass(frozen=True)
class ConfigAction:
    """S(q, t) on a configuration grid.

    Single valued up to declared winding offsets: crossing the periodic
    seam along axis k may advance S by winding[k] * 2*pi*hbar.  The
    compensating linear ramp is winding[k] * 2*pi*hbar * q_k / L_k.
    """

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    winding: tuple[int, ...] = ()
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", _check_mask(self.mask, values.shape))
        if values.shape != self.grid.shape:
            raise ValueError(f"action shape {values.shape} != grid shape {self.grid.shape}")
        winding = tuple(int(w) for w in self.winding) or (0,) * self.grid.dim
        if len(winding) != self.grid.dim:
            raise ValueError(f"need one winding offset per axis, got {winding}")
        object.__setattr__(self, "winding", winding)
        valid = values if self.mask is None else values[self.mask]
        if valid.size and not np.all(np.isfinite(valid)):
            raise ValueError("action has non-finite unmasked samples")

    @property
    def valid(self) -> np.ndarray:
        return np.ones(self.values.shape, bool) if self.mask is None else self.mask


@dataclass(frozen=True)
class MomentumField:
    """M_k(q, t) on a configuration grid, components stacked last."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape == self.grid.shape and self.grid.dim == 1:
            values = values[..., np.newaxis]
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape + (self.grid.dim,):
            raise ValueError(
                f"momentum field shape {values.shape} != {self.grid.shape + (self.grid.dim,)}"
            )
        object.__setattr__(self, "mask", _check_mask(self.mask, self.grid.shape))
        valid = values if self.mask is None else values[self.mask]
        if valid.size and not np.all(np.isfinite(valid)):
            raise ValueError("momentum field has non-finite unmasked samples")

    @property
    def valid(self) -> np.ndarray:
        return np.ones(self.grid.shape, bool) if self.mask is None else self.mask


@dataclass(frozen=True)
class CausticReport:
    """Breakdown diagnostic of a characteristics run.

    t_star is the first time min |det(dq_t/dq_0)| over the seeds fell
    below the threshold, or None if it never did; location is the
    position of the offending seed at that time.
    """

    t_star: float | None
    location: np.ndarray | None
    min_jacobian: float
    threshold: float
    truncated: bool = False

    def caustic_before(self, t: float) -> bool:
        return self.t_star is not None and self.t_star <= t

    def as_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "location": None if self.location is None else list(np.atleast_1d(self.location)),
            "min_jacobian": self.min_jacobian,
            "threshold": self.threshold,
            "truncated": self.truncated,
        }


def masked_max_abs(values: np.ndarray, mask: np.ndarray | None) -> float:
    """Max-norm over unmasked entries (0.0 if everything is masked)."""
    if mask is not None:
        values = values[mask]
    return float(np.max(np.abs(values))) if values.size else 0.0
