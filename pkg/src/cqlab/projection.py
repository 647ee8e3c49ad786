"""Momentum fields on configuration space, solved by characteristics.

The projected tier replaces the phase-space coordinate p by a field
M(q, t) over configuration space.  Its evolution equation (and the
Hamilton-Jacobi/continuity system that appears once M is a gradient) is
hyperbolic and develops caustics; the classical, multivalued-at-caustic
solution is wanted here, not a viscosity envelope, so everything is solved
with the method of characteristics:

  * a cloud of seeds q0 (oversampled relative to the grid, optionally
    spilling beyond the box when the initial data is analytic) is lifted
    onto the surface p = M0(q0) and advanced canonically;
  * each seed carries the action increment ds = (M.v - h) dt, the initial
    density, and the tangent matrices J = dq_t/dq_0, K = dp_t/dq_0;
  * the Eulerian fields are rebuilt on the grid by scattered linear
    interpolation of the cloud, with nodes outside the covered region
    masked out;
  * det J is monitored every step: the first time min |det J| drops below
    the threshold defines the caustic time t*, the run is truncated there
    and the breakdown is reported, never continued past it.

For the separable Hamiltonians used here the characteristics are exactly
the canonical trajectories, which is what makes the phase-space tier a
strict superset of this one: trajectories extracted from the evolved
field must coincide with canonical trajectories seeded on p = M0(q).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, LinearNDInterpolator, RegularGridInterpolator
from scipy.integrate import cumulative_simpson

from .errors import CausticError, NumericalBlowupError
from .fields import CausticReport, ConfigAction, ConfigDensity, MomentumField
from .grid import Grid, NumericsConfig, spectral_derivative
from .hamiltonian import Hamiltonian, force, lagrangian

__all__ = [
    "QAEvolution",
    "Trajectory",
    "evolve_canonical_condition",
    "evolve_hj_continuity",
    "extract_trajectory",
    "projected_action",
    "restrict_h",
    "vorticity",
    "consistency_s_minus_s_config",
    "numerical_gradient",
]


def restrict_h(H: Hamiltonian, M: MomentumField) -> np.ndarray:
    """Energy on the momentum surface: h(q, t) = H(q, M(q, t)) pointwise."""
    pts = M.grid.points_array()
    kinetic = np.sum(M.values**2, axis=-1) / (2.0 * H.m)
    return kinetic + H.potential_energy(pts)


def vorticity(M: MomentumField) -> np.ndarray:
    """Antisymmetrized gradient O_ik = d_i M_k - d_k M_i, spectral.

    Shape (*grid.shape, dim, dim); identically zero in one dimension (a
    1x1 antisymmetric tensor has no components).  Sampled fields must be
    periodic over the box for the spectral derivative to be meaningful.
    """
    grid = M.grid
    d = grid.dim
    out = np.zeros(grid.shape + (d, d))
    for i in range(d):
        for k in range(i + 1, d):
            o = (spectral_derivative(M.values[..., k], grid, axis=i)
                 - spectral_derivative(M.values[..., i], grid, axis=k))
            out[..., i, k] = o
            out[..., k, i] = -o
    return out


def numerical_gradient(f: Callable, pts: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar callable at (..., dim) points."""
    d = pts.shape[-1]
    out = np.empty(pts.shape)
    for k in range(d):
        dq = np.zeros(d)
        dq[k] = h
        out[..., k] = (np.asarray(f(pts + dq)) - np.asarray(f(pts - dq))) / (2.0 * h)
    return out


def _numerical_jacobian(f: Callable, pts: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """d f_i / d q_j of a vector callable, shape (..., dim, dim)."""
    d = pts.shape[-1]
    out = np.empty(pts.shape[:-1] + (d, d))
    for j in range(d):
        dq = np.zeros(d)
        dq[j] = h
        out[..., :, j] = (np.asarray(f(pts + dq)) - np.asarray(f(pts - dq))) / (2.0 * h)
    return out


def _det(J: np.ndarray) -> np.ndarray:
    if J.shape[-1] == 1:
        return J[..., 0, 0]
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


# ---------------------------------------------------------------------------
# seed cloud and its tangent flow


def _seed_positions(grid: Grid, oversample: float, margin: float) -> np.ndarray:
    axes = []
    for k in range(grid.dim):
        L = grid.extent[k] * margin
        n = int(round(grid.points[k] * oversample * margin))
        axes.append((np.arange(n) + 0.5) / n * L - L / 2.0)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _advance_cloud(H: Hamiltonian, q, p, s, J, K, h: float):
    """One RK4 step of the characteristic + action + tangent system."""
    m = H.m

    def rates(q, p, J, K):
        hess = H.potential.hessian(q, H.m)
        return (p / m, force(H, q), lagrangian(H, q, p), K / m,
                -np.einsum("...ij,...jk->...ik", hess, J))

    k1 = rates(q, p, J, K)
    k2 = rates(q + 0.5 * h * k1[0], p + 0.5 * h * k1[1], J + 0.5 * h * k1[3], K + 0.5 * h * k1[4])
    k3 = rates(q + 0.5 * h * k2[0], p + 0.5 * h * k2[1], J + 0.5 * h * k2[3], K + 0.5 * h * k2[4])
    k4 = rates(q + h * k3[0], p + h * k3[1], J + h * k3[3], K + h * k3[4])
    q = q + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    p = p + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    s = s + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    J = J + (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    K = K + (h / 6.0) * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
    return q, p, s, J, K


def _rebuild(grid: Grid, pts: np.ndarray, columns: np.ndarray):
    """Scattered linear interpolation of seed columns onto the grid nodes.

    Returns (values (*shape, ncol), covered (*shape)); nodes outside the
    covered region get NaN and covered=False.
    """
    ncol = columns.shape[-1]
    if grid.dim == 1:
        x = pts[:, 0]
        order = np.argsort(x)
        xs = x[order]
        nodes = grid.axis(0)
        out = np.empty((len(nodes), ncol))
        for c in range(ncol):
            out[:, c] = np.interp(nodes, xs, columns[order, c])
        covered = (nodes >= xs[0]) & (nodes <= xs[-1])
        out[~covered] = np.nan
        return out, covered
    interp = LinearNDInterpolator(pts, columns)
    nodes = grid.points_array().reshape(-1, 2)
    vals = interp(nodes).reshape(grid.shape + (ncol,))
    covered = ~np.isnan(vals[..., 0])
    return vals, covered


@dataclass(frozen=True)
class QAEvolution:
    """Time-resolved Eulerian rebuild of a characteristics run.

    Snapshot arrays are indexed (snapshot, *grid.shape[, component]);
    masks mark nodes covered by the seed cloud.  `report` carries the
    caustic diagnostic for the whole run.
    """

    grid: Grid
    hamiltonian: Hamiltonian
    times: np.ndarray
    momentum: np.ndarray
    masks: np.ndarray
    report: CausticReport
    action: np.ndarray | None = None
    density: np.ndarray | None = None
    winding: tuple[int, ...] = ()
    _cache: dict = dataclass_field(default_factory=dict, repr=False, compare=False)

    @property
    def t(self) -> float:
        return float(self.times[-1])

    @property
    def field(self) -> MomentumField:
        return MomentumField(self.grid, self.momentum[-1], t=self.t, mask=self.masks[-1])

    @property
    def action_field(self) -> ConfigAction:
        if self.action is None:
            raise ValueError("this run did not carry an action")
        return ConfigAction(self.grid, self.action[-1], t=self.t,
                            winding=self.winding, mask=self.masks[-1])

    @property
    def density_field(self) -> ConfigDensity:
        if self.density is None:
            raise ValueError("this run did not carry a density")
        vals = np.where(self.masks[-1], self.density[-1], 0.0)
        return ConfigDensity(self.grid, np.maximum(vals, 0.0), t=self.t, norm_tol=1e-5)

    def _spatial_interpolator(self, index: int):
        cache = self._cache
        if index not in cache:
            vals = self.momentum[index]
            mask = self.masks[index]
            if self.grid.dim == 1:
                nodes = self.grid.axis(0)
                idx = np.flatnonzero(mask)
                lo, hi = idx[0], idx[-1]
                spl = [CubicSpline(nodes[lo:hi + 1], vals[lo:hi + 1, c])
                       for c in range(vals.shape[-1])]
                lo_x, hi_x = nodes[lo], nodes[hi]

                def f(pts, spl=spl, lo_x=lo_x, hi_x=hi_x):
                    x = pts[..., 0]
                    if np.any((x < lo_x) | (x > hi_x)):
                        raise CausticError("query point outside the covered region")
                    return np.stack([s(x) for s in spl], axis=-1)
            else:
                axes = [self.grid.axis(k) for k in range(2)]
                filled = np.where(mask[..., np.newaxis], vals, np.nan)
                rgi = RegularGridInterpolator(axes, filled, method="linear",
                                              bounds_error=True)

                def f(pts, rgi=rgi):
                    out = rgi(pts)
                    if np.any(np.isnan(out)):
                        raise CausticError("query point outside the covered region")
                    return out
            cache[index] = f
        return cache[index]

    def momentum_at(self, pts: np.ndarray, t: float) -> np.ndarray:
        """M at arbitrary points and time: cubic in t across snapshots,
        cubic (1d) or linear (2d) in space within each snapshot."""
        times = self.times
        if not times[0] <= t <= times[-1] + 1e-12:
            raise CausticError(f"time {t} outside the evolved range [0, {times[-1]}]")
        j = min(np.searchsorted(times, t, side="right") - 1, len(times) - 2)
        j = max(j, 0)
        stencil = [max(0, min(len(times) - 1, jj)) for jj in (j - 1, j, j + 1, j + 2)]
        samples = [self._spatial_interpolator(i)(pts) for i in stencil]
        ts = times[stencil]
        # Lagrange interpolation over the (possibly clamped) stencil
        uniq, keep = [], []
        for i, tv in enumerate(ts):
            if tv not in uniq:
                uniq.append(tv)
                keep.append(i)
        out = 0.0
        for i in keep:
            w = 1.0
            for k in keep:
                if k != i:
                    w *= (t - ts[k]) / (ts[i] - ts[k])
            out = out + w * samples[i]
        return out

    def velocity_at(self, pts: np.ndarray, t: float) -> np.ndarray:
        return self.momentum_at(pts, t) / self.hamiltonian.m


def _evolve_cloud(H: Hamiltonian, grid: Grid, t: float, m0: Callable,
                  grad_m0: Callable | None, s0: Callable | None,
                  rho0: Callable | None, numerics: NumericsConfig,
                  oversample: float, margin: float,
                  snapshot_stride: int | None) -> QAEvolution:
    if t < 0:
        raise ValueError("projected evolutions run forward in time only")
    dt = numerics.dt
    n_steps = max(1, int(round(t / dt))) if t > 0 else 0
    h = t / n_steps if n_steps else 0.0
    if snapshot_stride is None:
        snapshot_stride = 1 if grid.dim == 1 else max(1, n_steps // 16)

    q0 = _seed_positions(grid, oversample, margin)
    n_seeds, d = q0.shape
    q = q0.copy()
    p = np.asarray(m0(q0), dtype=float).reshape(n_seeds, d)
    s = np.asarray(s0(q0), dtype=float).reshape(n_seeds) if s0 else np.zeros(n_seeds)
    rho_init = np.asarray(rho0(q0), dtype=float).reshape(n_seeds) if rho0 else None
    J = np.broadcast_to(np.eye(d), (n_seeds, d, d)).copy()
    K = (_numerical_jacobian(m0, q0) if grad_m0 is None
         else np.asarray(grad_m0(q0), dtype=float).reshape(n_seeds, d, d))

    carry_action = s0 is not None
    carry_density = rho0 is not None

    times, momenta, masks, actions, densities = [], [], [], [], []

    def snapshot(tau):
        cols = [p]
        if carry_action:
            cols.append(s[:, np.newaxis])
        if carry_density:
            dens = rho_init / np.abs(_det(J))
            cols.append(dens[:, np.newaxis])
        vals, covered = _rebuild(grid, q, np.concatenate(cols, axis=-1))
        times.append(tau)
        momenta.append(vals[..., :d])
        masks.append(covered)
        k = d
        if carry_action:
            actions.append(vals[..., k])
            k += 1
        if carry_density:
            densities.append(vals[..., k])

    snapshot(0.0)
    t_star, location = None, None
    min_det = 1.0
    truncated = False

    for i in range(1, n_steps + 1):
        q_n, p_n, s_n, J_n, K_n = _advance_cloud(H, q, p, s, J, K, h)
        if not np.all(np.isfinite(q_n)):
            raise NumericalBlowupError(f"characteristics left the finite range at t={i * h:.6g}")
        dets = np.abs(_det(J_n))
        step_min = float(dets.min())
        min_det = min(min_det, step_min)
        if step_min < numerics.eps_jac:
            t_star = i * h
            location = q_n[int(np.argmin(dets))].copy()
            truncated = i < n_steps
            break
        q, p, s, J, K = q_n, p_n, s_n, J_n, K_n
        if i % snapshot_stride == 0 or i == n_steps:
            snapshot(i * h)

    report = CausticReport(t_star=t_star, location=location, min_jacobian=min_det,
                           threshold=numerics.eps_jac, truncated=truncated)
    return QAEvolution(
        grid=grid,
        hamiltonian=H,
        times=np.asarray(times),
        momentum=np.asarray(momenta),
        masks=np.asarray(masks),
        report=report,
        action=np.asarray(actions) if carry_action else None,
        density=np.asarray(densities) if carry_density else None,
    )


def _as_vector_callable(M0, grid: Grid):
    """Normalize a MomentumField or callable into a points->(..., d) map."""
    if isinstance(M0, MomentumField):
        from scipy import ndimage

        samples = M0.values

        def m0(pts):
            coords = [(pts[..., k] - grid.axis(k)[0]) / grid.spacing[k]
                      for k in range(grid.dim)]
            flat = np.array([c.ravel() for c in coords])
            comps = [ndimage.map_coordinates(samples[..., c], flat, order=3,
                                             mode="grid-wrap").reshape(pts.shape[:-1])
                     for c in range(grid.dim)]
            return np.stack(comps, axis=-1)

        return m0, None
    return M0, None


def evolve_canonical_condition(H: Hamiltonian, M0, t: float, grid: Grid | None = None,
                               numerics: NumericsConfig | None = None,
                               grad_M0: Callable | None = None,
                               oversample: float = 4.0, margin: float = 2.0,
                               snapshot_stride: int | None = None) -> QAEvolution:
    """Evolve the momentum field by its canonical transport equation.

    M0 is either a MomentumField (seeds confined to the box, margin
    forced to 1) or a callable over points, in which case the seed cloud
    may spill beyond the box by `margin` so the rebuilt field keeps full
    coverage under contracting flows.  The returned run carries the
    evolved field (`.field`), the full time history, and the caustic
    report; if the caustic arrives before t the history is truncated at
    the last pre-caustic step and flagged.
    """
    numerics = numerics or NumericsConfig()
    if isinstance(M0, MomentumField):
        grid = M0.grid
        margin = 1.0
    if grid is None:
        raise ValueError("a grid is required when M0 is a callable")
    m0, _ = _as_vector_callable(M0, grid)
    return _evolve_cloud(H, grid, t, m0, grad_M0, None, None, numerics,
                         oversample, margin, snapshot_stride)


def evolve_hj_continuity(H: Hamiltonian, S0, rho0, t: float, grid: Grid | None = None,
                         numerics: NumericsConfig | None = None,
                         grad_S0: Callable | None = None,
                         hess_S0: Callable | None = None,
                         oversample: float = 4.0, margin: float = 2.0,
                         snapshot_stride: int | None = None) -> QAEvolution:
    """Solve Hamilton-Jacobi plus continuity as one characteristics run.

    S0 and rho0 are scalar callables over points (or ConfigAction /
    ConfigDensity samples, then differentiated/looked up on the grid).
    Seeds start on p = grad S0, carry ds = (M.v - h) dt and the density
    transported as rho0 / |det J|; all three Eulerian fields are rebuilt
    per snapshot.  Valid strictly before the caustic, like everything in
    this module.
    """
    numerics = numerics or NumericsConfig()
    if isinstance(S0, ConfigAction):
        grid = S0.grid
        margin = 1.0
        from .grid import gradient_fd

        grads = np.stack([gradient_fd(S0.values, grid, axis=k) for k in range(grid.dim)],
                         axis=-1)
        m_field = MomentumField(grid, grads, t=S0.t)
        m0, _ = _as_vector_callable(m_field, grid)
        samples = S0.values

        def s0(pts):
            from scipy import ndimage

            coords = [(pts[..., k] - grid.axis(k)[0]) / grid.spacing[k]
                      for k in range(grid.dim)]
            return ndimage.map_coordinates(samples, np.array([c.ravel() for c in coords]),
                                           order=3, mode="grid-wrap").reshape(pts.shape[:-1])
    else:
        if grid is None:
            raise ValueError("a grid is required when S0 is a callable")
        s0 = S0
        m0 = grad_S0 if grad_S0 is not None else (lambda pts: numerical_gradient(S0, pts))
    if isinstance(rho0, ConfigDensity):
        dgrid = rho0.grid
        samples_rho = rho0.values

        def rho0_fn(pts):
            from scipy import ndimage

            coords = [(pts[..., k] - dgrid.axis(k)[0]) / dgrid.spacing[k]
                      for k in range(dgrid.dim)]
            return ndimage.map_coordinates(samples_rho, np.array([c.ravel() for c in coords]),
                                           order=3, mode="grid-wrap").reshape(pts.shape[:-1])
    else:
        rho0_fn = rho0
    return _evolve_cloud(H, grid, t, m0, hess_S0, s0, rho0_fn, numerics,
                         oversample, margin, snapshot_stride)


@dataclass(frozen=True)
class Trajectory:
    """A trajectory extracted from an evolved momentum field."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def __len__(self):
        return len(self.times)


def extract_trajectory(H: Hamiltonian, evolution: QAEvolution, q0, t: float,
                       dt: float = 1e-3) -> Trajectory:
    """Integrate dq/dt = M(q, t)/m through the evolved field, then attach
    momenta by evaluating the field along the path.

    This is the projected-tier route to trajectories: initial momentum
    field -> field evolution -> position ODE -> momenta read off the
    field.  Raises if t reaches the caustic time or leaves the history.
    """
    if evolution.report.caustic_before(t):
        raise CausticError(
            f"trajectory undefined for t={t}: caustic at t*={evolution.report.t_star}")
    if t > evolution.t + 1e-12:
        raise CausticError(f"field history ends at {evolution.t}, requested {t}")
    q = np.atleast_1d(np.asarray(q0, dtype=float)).reshape(1, -1)
    n = max(1, int(round(t / dt))) if t > 0 else 0
    h = t / n if n else 0.0
    times = [0.0]
    qs = [q[0].copy()]
    ps = [evolution.momentum_at(q, 0.0)[0].copy()]
    for i in range(n):
        tau = i * h
        v = lambda x, s: evolution.velocity_at(x, s)
        k1 = v(q, tau)
        k2 = v(q + 0.5 * h * k1, tau + 0.5 * h)
        k3 = v(q + 0.5 * h * k2, tau + 0.5 * h)
        k4 = v(q + h * k3, tau + h)
        q = q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau = (i + 1) * h
        times.append(tau)
        qs.append(q[0].copy())
        ps.append(evolution.momentum_at(q, tau)[0].copy())
    return Trajectory(times=np.asarray(times), q=np.asarray(qs), p=np.asarray(ps))


def projected_action(H: Hamiltonian, trajectory: Trajectory, s0: float = 0.0) -> np.ndarray:
    """Accumulate s(t) = s0 + integral (M.v - h) dt along a trajectory.

    On the momentum surface the integrand reduces to the Lagrangian
    |p|^2/2m - V(q) evaluated along the path; composite Simpson over the
    stored samples.
    """
    v = trajectory.p / H.m
    mdotv = np.sum(trajectory.p * v, axis=-1)
    h_vals = H.value(trajectory.q, trajectory.p)
    integrand = mdotv - h_vals
    if len(trajectory) == 1:
        return np.array([s0])
    out = cumulative_simpson(integrand, x=trajectory.times, initial=0.0)
    return s0 + out


def consistency_s_minus_s_config(H: Hamiltonian, trajectory: Trajectory,
                                 s_along: np.ndarray, s0_phase: Callable,
                                 dt: float = 1e-3, max_samples: int = 21) -> float:
    """Drift of (projected action - phase action) along a trajectory.

    Both actions are transported by the same flow, so their difference
    must stay constant; the returned number is the maximal deviation of
    (s - S)(t) from its initial value over sampled times.  s0_phase maps
    initial (q, p) batches to phase-action values.
    """
    from .phase_ensemble import evolve_phase_action_at

    n = len(trajectory)
    idx = np.unique(np.linspace(0, n - 1, min(max_samples, n)).astype(int))
    diffs = []
    for i in idx:
        t_i = float(trajectory.times[i])
        S_i = evolve_phase_action_at(H, s0_phase, trajectory.q[i][np.newaxis],
                                     trajectory.p[i][np.newaxis], t_i, dt)[0]
        diffs.append(s_along[i] - S_i)
    diffs = np.asarray(diffs)
    return float(np.max(np.abs(diffs - diffs[0])))
