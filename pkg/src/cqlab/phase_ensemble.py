"""Statistical ensembles on phase space.

The tier with full (q, p) resolution: canonical trajectories, transport
of the phase-space density rho(q, p, t) along them, the action variable
S(q, p, t) accumulating the Lagrangian along the flow, and expectation
values as phase-space quadratures.

The density is advected semi-Lagrangially: each output node is traced
backward through the exact canonical flow and the initial data is
interpolated there (bicubic).  This is unconditionally stable and keeps
the Lagrangian/Eulerian correspondence explicit.  rho and S never couple:
the action obeys its own transport law with the Lagrangian as source,
independent of the density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import NumericalBlowupError
from .grid import PhaseGrid
from .hamiltonian import Hamiltonian, force, lagrangian, velocity_map

__all__ = [
    "PhaseState",
    "PhaseDensity",
    "PhaseAction",
    "integrate_characteristic",
    "canonical_flow",
    "canonical_flow_with_action",
    "evolve_liouville",
    "expectation",
    "evolve_phase_action",
    "evolve_phase_action_at",
    "evolve_phase_wavefunction",
    "monte_carlo_expectations",
    "phase_interpolator",
]


@dataclass(frozen=True)
class PhaseState:
    """One point of the canonical flow: positions, momenta, time."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have matching shapes")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise NumericalBlowupError("phase state has non-finite components")


@dataclass(frozen=True)
class PhaseDensity:
    """Samples of rho(q, p, t) on a phase grid; normalized, non-negative."""

    grid: PhaseGrid
    values: np.ndarray
    t: float = 0.0
    norm_tol: float = 1e-8

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise ValueError(f"density shape {values.shape} != grid shape {self.grid.shape}")
        if values.min() < -1e-10:
            raise ValueError(f"density has negative samples down to {values.min():.3e}")
        total = self.grid.quadrature(values)
        if abs(total - 1.0) > self.norm_tol:
            raise ValueError(f"density normalizes to {total!r}, outside tolerance {self.norm_tol}")


@dataclass(frozen=True)
class PhaseAction:
    """Samples of the action variable S(q, p, t) on a phase grid.

    Defined up to an additive constant; the gauge is fixed by transporting
    the initial values exactly (no renormalization anywhere).
    """

    grid: PhaseGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise ValueError(f"action shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("action samples must be finite")


def _split_steps(t: float, dt: float) -> tuple[int, float]:
    """Number of steps and signed step size landing exactly on t."""
    if t == 0.0:
        return 0, 0.0
    n = max(1, int(round(abs(t) / dt)))
    return n, t / n


def _rk4_step(H: Hamiltonian, q: np.ndarray, p: np.ndarray, h: float):
    m = H.m
    k1q, k1p = p / m, force(H, q)
    k2q, k2p = (p + 0.5 * h * k1p) / m, force(H, q + 0.5 * h * k1q)
    k3q, k3p = (p + 0.5 * h * k2p) / m, force(H, q + 0.5 * h * k2q)
    k4q, k4p = (p + h * k3p) / m, force(H, q + h * k3q)
    q = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return q, p


def _verlet_step(H: Hamiltonian, q: np.ndarray, p: np.ndarray, h: float):
    p = p + 0.5 * h * force(H, q)
    q = q + h * p / H.m
    p = p + 0.5 * h * force(H, q)
    return q, p


_STEPPERS = {"rk4": _rk4_step, "verlet": _verlet_step}


def canonical_flow(H: Hamiltonian, q, p, t: float, dt: float = 1e-3,
                   method: str = "rk4") -> tuple[np.ndarray, np.ndarray]:
    """Advance batched phase points (..., dim) by time t (t < 0 runs backward)."""
    if method not in _STEPPERS:
        raise ValueError(f"unknown integrator {method!r}; use 'rk4' or 'verlet'")
    step = _STEPPERS[method]
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    n, h = _split_steps(t, dt)
    for _ in range(n):
        q, p = step(H, q, p, h)
    return q, p


def canonical_flow_with_action(H: Hamiltonian, q, p, t: float, dt: float = 1e-3,
                               s0=0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical flow augmented with dS = Lagrangian dt (RK4 throughout).

    Returns the transported points and the action accumulated from s0
    along each trajectory.
    """
    m = H.m
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    s = np.broadcast_to(np.asarray(s0, dtype=float), q.shape[:-1]).copy()
    n, h = _split_steps(t, dt)
    for _ in range(n):
        k1q, k1p, k1s = p / m, force(H, q), lagrangian(H, q, p)
        q2, p2 = q + 0.5 * h * k1q, p + 0.5 * h * k1p
        k2q, k2p, k2s = p2 / m, force(H, q2), lagrangian(H, q2, p2)
        q3, p3 = q + 0.5 * h * k2q, p + 0.5 * h * k2p
        k3q, k3p, k3s = p3 / m, force(H, q3), lagrangian(H, q3, p3)
        q4, p4 = q + h * k3q, p + h * k3p
        k4q, k4p, k4s = p4 / m, force(H, q4), lagrangian(H, q4, p4)
        q = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        s = s + (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    return q, p, s


def integrate_characteristic(H: Hamiltonian, state0: PhaseState, t: float,
                             dt: float = 1e-3, method: str = "rk4") -> PhaseState:
    """Advance a single canonical trajectory from state0 by time t."""
    q, p = canonical_flow(H, state0.q[np.newaxis, :], state0.p[np.newaxis, :], t, dt, method)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NumericalBlowupError(f"trajectory left the finite range at t={state0.t + t}")
    return PhaseState(q=q[0], p=p[0], t=state0.t + t)


def phase_interpolator(grid: PhaseGrid, values: np.ndarray,
                       fill: float = 0.0) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Bicubic interpolant of phase-grid samples; `fill` outside the box.

    Zero fill encodes the localized-data assumption: a backward
    characteristic that exits the sampled box came from a region where
    the (localized) initial data vanishes.
    """
    qs, ps = grid.q.axis(), grid.p.axis()
    spline = RectBivariateSpline(qs, ps, values, kx=3, ky=3)

    def interp(q: np.ndarray, p: np.ndarray) -> np.ndarray:
        out = spline.ev(q, p)
        inside = (q >= qs[0]) & (q <= qs[-1]) & (p >= ps[0]) & (p <= ps[-1])
        return np.where(inside, out, fill)

    return interp


def evolve_liouville(H: Hamiltonian, rho0: PhaseDensity, t: float,
                     dt: float = 1e-3, method: str = "rk4") -> PhaseDensity:
    """Transport the phase-space density along the canonical flow.

    rho(x, t) = rho0(flow_{-t}(x)): every output node is traced backward
    and the initial data interpolated there.  The flow is volume
    preserving, so no Jacobian factor appears.
    """
    if t == 0.0:
        return rho0
    grid = rho0.grid
    Q, P = grid.meshgrid()
    q = Q.ravel()[:, np.newaxis]
    p = P.ravel()[:, np.newaxis]
    qb, pb = canonical_flow(H, q, p, -t, dt, method)
    interp = phase_interpolator(grid, rho0.values)
    vals = interp(qb[:, 0], pb[:, 0]).reshape(grid.shape)
    vals = np.where(np.abs(vals) < 1e-300, 0.0, vals)
    return PhaseDensity(grid=grid, values=vals, t=rho0.t + t, norm_tol=1e-6)


def expectation(rho: PhaseDensity, observable: np.ndarray) -> float:
    """Ensemble average: the phase-space quadrature of rho * A."""
    return float(rho.grid.quadrature(rho.values * observable))


def evolve_phase_action_at(H: Hamiltonian, s0: Callable[[np.ndarray, np.ndarray], np.ndarray],
                           q, p, t: float, dt: float = 1e-3) -> np.ndarray:
    """Action values at arbitrary phase points (..., dim) at time t.

    Traces each point backward, reads the initial action there, and adds
    the Lagrangian integral along the connecting trajectory.  s0 maps
    batched (q, p) arrays to initial action values.
    """
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    qb, pb, s_back = canonical_flow_with_action(H, q, p, -t, dt, s0=0.0)
    # s_back = integral of L from t down to 0, i.e. minus the forward integral
    return np.asarray(s0(qb, pb), dtype=float) - s_back


def evolve_phase_action(H: Hamiltonian, S0, t: float, grid: PhaseGrid | None = None,
                        dt: float = 1e-3) -> PhaseAction:
    """Evolve the action variable on a phase grid.

    S0 may be a PhaseAction (samples, interpolated bicubically at the
    backward feet) or a callable s0(q, p) evaluated there exactly; prefer
    the callable form whenever the initial action is known analytically,
    since backward feet may leave the sampled box.
    """
    if isinstance(S0, PhaseAction):
        grid = S0.grid
        spline = RectBivariateSpline(grid.q.axis(), grid.p.axis(), S0.values, kx=3, ky=3)
        s0 = lambda q, p: spline.ev(q[..., 0], p[..., 0])
        t0 = S0.t
    else:
        if grid is None:
            raise ValueError("a grid is required when S0 is a callable")
        s0 = lambda q, p: np.asarray(S0(q[..., 0], p[..., 0]), dtype=float)
        t0 = 0.0
    if t == 0.0 and isinstance(S0, PhaseAction):
        return S0
    Q, P = grid.meshgrid()
    q = Q.ravel()[:, np.newaxis]
    p = P.ravel()[:, np.newaxis]
    vals = evolve_phase_action_at(H, s0, q, p, t, dt).reshape(grid.shape)
    return PhaseAction(grid=grid, values=vals, t=t0 + t)


def evolve_phase_wavefunction(H: Hamiltonian, rho0: PhaseDensity, S0, t: float,
                              hbar: float = 1.0, dt: float = 1e-3,
                              method: str = "rk4") -> np.ndarray:
    """sqrt(rho_t) * exp(i S_t / hbar) on the phase grid.

    By construction this solves the characteristics form of the
    phase-space wave equation: the modulus squared is exactly the
    transported density and the phase is the transported action.
    """
    rho_t = evolve_liouville(H, rho0, t, dt, method)
    S_t = evolve_phase_action(H, S0, t, grid=rho0.grid, dt=dt)
    return np.sqrt(np.maximum(rho_t.values, 0.0)) * np.exp(1j * S_t.values / hbar)


def monte_carlo_expectations(H: Hamiltonian, sampler: Callable, n_samples: int,
                             t: float, dt: float = 1e-3, method: str = "verlet",
                             seed: int = 0) -> dict:
    """Ensemble averages over sampled characteristics, with standard errors.

    sampler(rng, n) must return initial (q, p) arrays of shape (n, dim).
    Returns {"q": (mean, stderr), "p": ..., "H": ...} per component for q
    and p (first component reported for dim 1).
    """
    rng = np.random.default_rng(seed)
    q0, p0 = sampler(rng, n_samples)
    q, p = canonical_flow(H, q0, p0, t, dt, method)
    energies = H.value(q, p)

    def stats(a: np.ndarray) -> tuple[float, float]:
        return float(a.mean()), float(a.std(ddof=1) / np.sqrt(len(a)))

    return {
        "q": stats(q[:, 0]),
        "p": stats(p[:, 0]),
        "H": stats(np.asarray(energies)),
    }
