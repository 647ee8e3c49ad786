"""Separable Hamiltonians H(q, p) = |p|^2/2m + V(q) and a potential catalog.

All solvers get their dynamics from three maps evaluated here: the
velocity map dH/dp = p/m, the force -dV/dq, and the along-trajectory
Lagrangian p.dH/dp - H = |p|^2/2m - V.  Potentials are twice
differentiable; custom entries are tabulated on a grid (periodic by
construction) and differentiated spectrally, so there is a single
differentiation pathway for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage

from .errors import GridError, ScenarioError
from .grid import Grid, spectral_derivative

__all__ = [
    "Potential",
    "Hamiltonian",
    "velocity_map",
    "force",
    "lagrangian",
    "potential_from_spec",
    "POTENTIAL_KINDS",
]

POTENTIAL_KINDS = ("free", "harmonic", "quartic", "double_well", "custom")


def as_points(q, dim: int) -> np.ndarray:
    """Coerce scalar / (dim,) / (..., dim) input to an (..., dim) array."""
    q = np.asarray(q, dtype=float)
    if dim == 1 and (q.ndim == 0 or q.shape[-1] != 1):
        q = q[..., np.newaxis]
    if q.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} components, got shape {q.shape}")
    return q


def _map_samples(samples: np.ndarray, grid: Grid, pts: np.ndarray) -> np.ndarray:
    """Cubic-spline lookup of tabulated samples at arbitrary points (periodic)."""
    coords = []
    for k in range(grid.dim):
        h = grid.spacing[k]
        q0 = grid.axis(k)[0]
        coords.append((pts[..., k] - q0) / h)
    flat = [c.ravel() for c in coords]
    out = ndimage.map_coordinates(samples, np.array(flat), order=3, mode="grid-wrap")
    return out.reshape(pts.shape[:-1])


@dataclass(frozen=True)
class Potential:
    """Catalog potential or a tabulated periodic one.

    kinds and parameters:
      free                      V = 0
      harmonic   (omega)        V = m omega^2 |q|^2 / 2
      quartic    (lam)          V = lam * sum_k q_k^4 / 4
      double_well(a, b)         V = a (|q|^2 - b^2)^2
      custom     (samples,grid) V tabulated on the periodic grid

    The harmonic entry carries the frequency, not the stiffness, so its
    energy depends on the mass of the Hamiltonian it is attached to.
    """

    kind: str
    params: dict = field(default_factory=dict)
    samples: np.ndarray | None = None
    grid: Grid | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ScenarioError(
                f"unknown potential type {self.kind!r}; valid: {', '.join(POTENTIAL_KINDS)}"
            )
        if self.kind == "custom" and (self.samples is None or self.grid is None):
            raise ScenarioError("custom potential requires tabulated samples and their grid")

    def value(self, q, m: float = 1.0) -> np.ndarray:
        pts = as_points(q, self._dim_of(q))
        if self.kind == "free":
            return np.zeros(pts.shape[:-1])
        if self.kind == "harmonic":
            w = self.params["omega"]
            return 0.5 * m * w**2 * np.sum(pts**2, axis=-1)
        if self.kind == "quartic":
            lam = self.params["lam"]
            return 0.25 * lam * np.sum(pts**4, axis=-1)
        if self.kind == "double_well":
            a, b = self.params["a"], self.params["b"]
            return a * (np.sum(pts**2, axis=-1) - b**2) ** 2
        return _map_samples(self.samples, self.grid, pts)

    def gradient(self, q, m: float = 1.0) -> np.ndarray:
        """dV/dq_k, shape (..., dim)."""
        pts = as_points(q, self._dim_of(q))
        if self.kind == "free":
            return np.zeros_like(pts)
        if self.kind == "harmonic":
            return m * self.params["omega"] ** 2 * pts
        if self.kind == "quartic":
            return self.params["lam"] * pts**3
        if self.kind == "double_well":
            a, b = self.params["a"], self.params["b"]
            r2 = np.sum(pts**2, axis=-1, keepdims=True)
            return 4.0 * a * (r2 - b**2) * pts
        grads = [
            _map_samples(spectral_derivative(self.samples, self.grid, axis=k, order=1),
                         self.grid, pts)
            for k in range(self.grid.dim)
        ]
        return np.stack(grads, axis=-1)

    def hessian(self, q, m: float = 1.0) -> np.ndarray:
        """d2V/dq_i dq_j, shape (..., dim, dim); used by the tangent flow."""
        pts = as_points(q, self._dim_of(q))
        dim = pts.shape[-1]
        lead = pts.shape[:-1]
        eye = np.eye(dim)
        if self.kind == "free":
            return np.zeros(lead + (dim, dim))
        if self.kind == "harmonic":
            w = self.params["omega"]
            return np.broadcast_to(m * w**2 * eye, lead + (dim, dim)).copy()
        if self.kind == "quartic":
            lam = self.params["lam"]
            out = np.zeros(lead + (dim, dim))
            for i in range(dim):
                out[..., i, i] = 3.0 * lam * pts[..., i] ** 2
            return out
        if self.kind == "double_well":
            a, b = self.params["a"], self.params["b"]
            r2 = np.sum(pts**2, axis=-1)
            out = 8.0 * a * pts[..., :, np.newaxis] * pts[..., np.newaxis, :]
            out += (4.0 * a * (r2 - b**2))[..., np.newaxis, np.newaxis] * eye
            return out
        out = np.empty(lead + (dim, dim))
        for i in range(dim):
            d_i = spectral_derivative(self.samples, self.grid, axis=i, order=1)
            for j in range(i, dim):
                if i == j:
                    dd = spectral_derivative(self.samples, self.grid, axis=i, order=2)
                else:
                    dd = spectral_derivative(d_i, self.grid, axis=j, order=1)
                vals = _map_samples(dd, self.grid, pts)
                out[..., i, j] = vals
                out[..., j, i] = vals
        return out

    def _dim_of(self, q) -> int:
        if self.grid is not None:
            return self.grid.dim
        q = np.asarray(q)
        return 1 if q.ndim == 0 else (q.shape[-1] if q.ndim >= 1 else 1)


@dataclass(frozen=True)
class Hamiltonian:
    """H(q, p) = |p|^2 / 2m + V(q), time independent."""

    m: float
    potential: Potential

    def __post_init__(self):
        if not self.m > 0:
            raise ScenarioError(f"mass must be positive, got {self.m}")

    @property
    def dim_hint(self) -> int | None:
        return None if self.potential.grid is None else self.potential.grid.dim

    def potential_energy(self, q) -> np.ndarray:
        return self.potential.value(q, self.m)

    def value(self, q, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        kinetic = np.sum(p**2, axis=-1) / (2.0 * self.m)
        return kinetic + self.potential_energy(q)

    def tabulate_potential(self, grid: Grid) -> np.ndarray:
        return self.potential.value(grid.points_array(), self.m)


def velocity_map(H: Hamiltonian, p) -> np.ndarray:
    """dH/dp_k = p_k / m."""
    return np.asarray(p, dtype=float) / H.m


def force(H: Hamiltonian, q) -> np.ndarray:
    """-dV/dq_k, shape (..., dim)."""
    return -H.potential.gradient(q, H.m)


def lagrangian(H: Hamiltonian, q, p) -> np.ndarray:
    """p . dH/dp - H = |p|^2/2m - V(q) for the separable form."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    kinetic = np.sum(p**2, axis=-1) / (2.0 * H.m)
    return kinetic - H.potential_energy(q)


def potential_from_spec(spec: dict[str, Any], grid: Grid | None = None) -> Potential:
    """Build a catalog potential from its scenario-JSON form.

    Examples: {"type": "harmonic", "omega": 1.0},
              {"type": "quartic", "lam": 1.0},
              {"type": "double_well", "a": 1.0, "b": 1.0},
              {"type": "custom", "samples": [...]} (needs the grid).
    """
    if "type" not in spec:
        raise ScenarioError("potential: missing key 'type'")
    kind = spec["type"]
    if kind == "free":
        return Potential("free")
    if kind == "harmonic":
        omega = spec.get("omega")
        if omega is None:
            raise ScenarioError("potential.harmonic: missing key 'omega'")
        if not omega > 0:
            raise ScenarioError(f"potential.harmonic: 'omega' must be positive, got {omega}")
        return Potential("harmonic", {"omega": float(omega)})
    if kind == "quartic":
        lam = spec.get("lam")
        if lam is None:
            raise ScenarioError("potential.quartic: missing key 'lam'")
        if not lam > 0:
            raise ScenarioError(f"potential.quartic: 'lam' must be positive, got {lam}")
        return Potential("quartic", {"lam": float(lam)})
    if kind == "double_well":
        for key in ("a", "b"):
            if key not in spec:
                raise ScenarioError(f"potential.double_well: missing key {key!r}")
        return Potential("double_well", {"a": float(spec["a"]), "b": float(spec["b"])})
    if kind == "custom":
        if grid is None:
            raise ScenarioError("potential.custom: tabulation requires a grid")
        samples = np.asarray(spec.get("samples"), dtype=float)
        if samples.shape != grid.shape:
            raise ScenarioError(
                f"potential.custom: samples shape {samples.shape} != grid shape {grid.shape}"
            )
        return Potential("custom", samples=samples, grid=grid)
    raise ScenarioError(
        f"unknown potential type {kind!r}; valid: {', '.join(POTENTIAL_KINDS)}"
    )
