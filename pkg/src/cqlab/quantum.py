"""Wave-function dynamics and the Madelung bridge to the projected tier.

Two evolutions share one Strang-split spectral stepper (half potential
kick, full kinetic drift in Fourier space, half potential kick):

  * the linear Schrodinger evolution;
  * the same equation plus a density-dependent counter-term
    +T_Q[|psi|^2] psi with T_Q = (hbar^2/2m) lap(sqrt(rho))/sqrt(rho),
    which cancels the quantum coupling so that the Madelung fields of the
    solution obey the *classical* Hamilton-Jacobi + continuity system.

The counter-term is real, so it is applied as an extra local phase inside
each half kick with rho frozen per substep; the modulus is preserved
exactly per kick.  With the nonlinear coefficient set to zero the stepper
executes the identical float operations as the linear path, so the two
agree bit for bit.  The nonlinear evolution is only locally valid:
growth of |T_Q| beyond a bound aborts the run with a report instead of
silently regularizing it.

The Madelung decomposition psi = sqrt(rho) exp(iS/hbar) is the interface
to the field tiers: rho = |psi|^2 and S = hbar * unwrapped phase, with S
undefined (masked) wherever rho falls below the floor, and any whole
windings across the periodic seam recorded per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowupReport, SingularAmplitudeError
from .fields import ConfigAction, ConfigDensity
from .grid import Grid, quadrature, spectral_derivative
from .hamiltonian import Hamiltonian

__all__ = [
    "WaveFunction",
    "MadelungPair",
    "evolve_schrodinger",
    "evolve_classical_wave",
    "madelung_decompose",
    "madelung_compose",
    "quantum_potential",
    "modified_hj_residual",
    "qt_expectations",
    "gaussian_packet",
    "coherent_state",
    "eigenstate_n",
    "plane_wave",
    "vortex_2d",
    "QT_STATE_CATALOG",
]


@dataclass(frozen=True)
class WaveFunction:
    """Complex samples psi(q) on a configuration grid, unit norm."""

    grid: Grid
    values: np.ndarray
    hbar: float = 1.0
    t: float = 0.0
    norm_tol: float = 1e-10

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise ValueError(f"psi shape {values.shape} != grid shape {self.grid.shape}")
        norm = quadrature(np.abs(values) ** 2, self.grid)
        if abs(norm - 1.0) > self.norm_tol:
            raise ValueError(f"|psi|^2 integrates to {norm!r}, outside tolerance {self.norm_tol}")

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


@dataclass(frozen=True)
class MadelungPair:
    """Density and phase-action content of a wave function.

    `mask` is True where the density is above the floor and the action is
    defined; composing the pair reproduces psi up to a global phase and
    up to the masked region.
    """

    density: ConfigDensity
    action: ConfigAction
    mask: np.ndarray
    hbar: float


def _kinetic_phase(grid: Grid, hbar: float, m: float, h: float) -> np.ndarray:
    k2 = 0.0
    for axis in range(grid.dim):
        k = grid.wavenumbers(axis)
        shape = [1] * grid.dim
        shape[axis] = len(k)
        k2 = k2 + (k.reshape(shape)) ** 2
    return np.exp(-0.5j * hbar * k2 * h / m)


def _tq_values(rho: np.ndarray, grid: Grid, hbar: float, m: float,
               mask: np.ndarray) -> np.ndarray:
    """Quantum kinetic correction with masked entries set to zero.

    The amplitude spectrum is floored at 1e-13 of its peak before
    differentiating: the Laplacian amplifies rounding noise by k^2, and
    without the floor a constant density (whose correction vanishes
    identically) accretes a spurious self-amplifying phase over long
    nonlinear runs.
    """
    amp = np.sqrt(np.maximum(rho, 0.0))
    spec = np.fft.fftn(amp)
    spec[np.abs(spec) < 1e-13 * np.abs(spec).max()] = 0.0
    k2 = 0.0
    for axis in range(grid.dim):
        k = grid.wavenumbers(axis)
        shape = [1] * grid.dim
        shape[axis] = len(k)
        k2 = k2 + k.reshape(shape) ** 2
    lap = np.fft.ifftn(-k2 * spec).real
    out = np.zeros_like(rho)
    np.divide(lap, amp, out=out, where=mask)
    return (hbar**2 / (2.0 * m)) * out


def _strang_evolve(H: Hamiltonian, psi0: WaveFunction, t: float, dt: float,
                   nonlinear_coefficient: float, blowup_factor: float,
                   eps_rho: float, eps_nonlinear: float | None = None) -> WaveFunction:
    grid = psi0.grid
    hbar = psi0.hbar
    if t == 0.0:
        return psi0
    if t < 0:
        raise ValueError("wave evolutions run forward in time only")
    n = max(1, int(round(t / dt)))
    h = t / n
    V = H.tabulate_potential(grid)
    expT = _kinetic_phase(grid, hbar, H.m, h)
    expV = np.exp(-0.5j * V * h / hbar)
    psi = psi0.values.copy()
    nl = nonlinear_coefficient != 0.0
    if eps_nonlinear is None:
        eps_nonlinear = eps_rho
    bound = np.inf

    def nonlinear_half_kick(psi, tau):
        rho = np.abs(psi) ** 2
        peak = rho.max()
        lost = quadrature(np.where(rho >= eps_rho * peak, 0.0, rho), grid)
        if lost > 1e-6:
            raise SingularAmplitudeError(
                f"density below floor carries probability {lost:.3e} inside the support")
        # the counter-term is only trustworthy where the density is
        # appreciable; below eps_nonlinear the tail is splitting noise and
        # dividing by sqrt(rho) would feed garbage phases back into the run
        mask = rho >= eps_nonlinear * peak
        tq = _tq_values(rho, grid, hbar, H.m, mask)
        magnitude = float(np.max(np.abs(tq)))
        if magnitude > bound:
            raise BlowupReport(t=tau, magnitude=magnitude, bound=bound)
        return expV * np.exp(-0.5j * nonlinear_coefficient * tq * h / hbar) * psi

    if nl:
        rho0 = np.abs(psi) ** 2
        mask0 = rho0 >= eps_nonlinear * rho0.max()
        scale = max(1.0, float(np.max(np.abs(_tq_values(rho0, grid, hbar, H.m, mask0)))))
        bound = blowup_factor * scale

    for i in range(n):
        if nl:
            psi = nonlinear_half_kick(psi, i * h)
            psi = np.fft.ifftn(expT * np.fft.fftn(psi))
            psi = nonlinear_half_kick(psi, (i + 1) * h)
        else:
            psi = expV * psi
            psi = np.fft.ifftn(expT * np.fft.fftn(psi))
            psi = expV * psi
    return WaveFunction(grid=grid, values=psi, hbar=hbar, t=psi0.t + t,
                        norm_tol=max(psi0.norm_tol, 1e-9))


def evolve_schrodinger(H: Hamiltonian, psi0: WaveFunction, t: float,
                       dt: float = 1e-3) -> WaveFunction:
    """Strang-split spectral evolution of the linear wave equation.

    Exact for free motion (the potential kicks are trivial) and exact per
    Fourier mode for the kinetic phases; the norm is conserved to
    rounding because every factor is a pure phase.
    """
    return _strang_evolve(H, psi0, t, dt, nonlinear_coefficient=0.0,
                          blowup_factor=np.inf, eps_rho=1e-12)


def evolve_classical_wave(H: Hamiltonian, psi0: WaveFunction, t: float,
                          dt: float = 1e-3, nonlinear_coefficient: float = 1.0,
                          blowup_factor: float = 1e6, eps_rho: float = 1e-12,
                          eps_nonlinear: float | None = None) -> WaveFunction:
    """Evolve the nonlinear wave equation i*hbar dpsi/dt = (H + c T_Q) psi.

    With the full coefficient (c = 1) the extra term removes the quantum
    coupling between density and phase, so the run reproduces the
    projected Hamilton-Jacobi + continuity fields while they exist; it is
    expected to blow up around caustics, and does so loudly (BlowupReport)
    rather than being damped.  With c = 0 this is bit for bit the linear
    path.
    """
    return _strang_evolve(H, psi0, t, dt, nonlinear_coefficient=nonlinear_coefficient,
                          blowup_factor=blowup_factor, eps_rho=eps_rho,
                          eps_nonlinear=eps_nonlinear)


def _wrap_to_pi(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _axis_winding(phi: np.ndarray, axis: int) -> int:
    """Whole turns of the phase along a periodic axis, from wrapped diffs."""
    diffs = _wrap_to_pi(np.diff(phi, axis=axis))
    seam = _wrap_to_pi(np.take(phi, 0, axis=axis) - np.take(phi, -1, axis=axis))
    total = diffs.sum(axis=axis) + seam
    return int(np.round(np.median(total) / (2.0 * np.pi)))


def madelung_decompose(psi: WaveFunction, eps_rho: float = 1e-12) -> MadelungPair:
    """Split psi into rho = |psi|^2 and S = hbar * unwrapped phase.

    The phase is unwrapped sequentially along the last axis (row-major),
    and in two dimensions the rows are stitched together by unwrapping
    the first column; whole windings across the periodic seam are counted
    per axis and recorded.  S is undefined (NaN + mask) where rho falls
    below eps_rho times its maximum.
    """
    grid = psi.grid
    rho = psi.density
    mask = rho >= eps_rho * rho.max()
    phi = np.angle(psi.values)
    # unwrap outward from the density peak: starting inside the noise tail
    # would walk a random branch offset into the bulk
    peak = np.unravel_index(int(np.argmax(rho)), grid.shape)
    if grid.dim == 1:
        phi = np.roll(np.unwrap(np.roll(phi, -peak[0])), peak[0])
    else:
        phi = np.roll(phi, (-peak[0], -peak[1]), axis=(0, 1))
        phi = np.unwrap(phi, axis=1)
        col = np.unwrap(phi[:, 0])
        phi = phi + (col - phi[:, 0])[:, np.newaxis]
        phi = np.roll(phi, (peak[0], peak[1]), axis=(0, 1))
    winding = tuple(_axis_winding(np.angle(psi.values), axis=k) for k in range(grid.dim))
    S = psi.hbar * phi
    S = np.where(mask, S, np.nan)
    density = ConfigDensity(grid, rho, t=psi.t, mask=mask,
                            norm_tol=max(1e-8, psi.norm_tol))
    action = ConfigAction(grid, S, t=psi.t, winding=winding, mask=mask)
    return MadelungPair(density=density, action=action, mask=mask, hbar=psi.hbar)


def madelung_compose(pair: MadelungPair) -> WaveFunction:
    """Rebuild psi = sqrt(rho) exp(iS/hbar); masked entries carry zero phase."""
    S = np.where(pair.mask, pair.action.values, 0.0)
    values = np.sqrt(np.maximum(pair.density.values, 0.0)) * np.exp(1j * S / pair.hbar)
    return WaveFunction(pair.density.grid, values, hbar=pair.hbar, t=pair.density.t,
                        norm_tol=1e-6)


def quantum_potential(rho, grid: Grid | None = None, hbar: float = 1.0,
                      m: float = 1.0, eps_rho: float = 1e-12) -> np.ndarray:
    """T_Q = (hbar^2 / 2m) lap(sqrt(rho)) / sqrt(rho), spectral Laplacian.

    Accepts a ConfigDensity or raw samples plus their grid; entries where
    rho is below the floor are NaN.
    """
    if isinstance(rho, ConfigDensity):
        grid, rho = rho.grid, rho.values
    if grid is None:
        raise ValueError("a grid is required when rho is a raw array")
    mask = rho >= eps_rho * rho.max()
    out = _tq_values(rho, grid, hbar, m, mask)
    return np.where(mask, out, np.nan)


def _align_action(S_ref: np.ndarray, S: np.ndarray, hbar: float,
                  ref_index: tuple) -> np.ndarray:
    """Remove a whole 2*pi*hbar branch offset between two unwrapped actions."""
    step = 2.0 * np.pi * hbar
    offset = step * np.round((S[ref_index] - S_ref[ref_index]) / step)
    return S - offset


def modified_hj_residual(pair_a: MadelungPair, pair_b: MadelungPair,
                         H: Hamiltonian) -> float:
    """Max-norm residual of dS/dt + H(q, grad S) - T_Q on Madelung fields.

    The two pairs must come from the same run at nearby times; the time
    derivative is the centered difference between them (after aligning
    any 2*pi*hbar branch jump) and the spatial terms are evaluated on the
    midpoint fields.  For solutions of the linear wave equation the
    residual vanishes up to discretization.
    """
    grid = pair_a.density.grid
    dt_pair = pair_b.density.t - pair_a.density.t
    if dt_pair <= 0:
        raise ValueError("pair_b must be later than pair_a")
    mask = pair_a.mask & pair_b.mask
    ref = np.unravel_index(int(np.argmax(pair_a.density.values)), grid.shape)
    S_b = _align_action(pair_a.action.values, pair_b.action.values, pair_a.hbar, ref)
    dSdt = (S_b - pair_a.action.values) / dt_pair
    S_mid = 0.5 * (pair_a.action.values + S_b)
    rho_mid = 0.5 * (pair_a.density.values + pair_b.density.values)
    S_filled = np.where(mask, S_mid, 0.0)
    grad2 = 0.0
    for axis in range(grid.dim):
        from .grid import gradient_fd

        g = gradient_fd(S_filled, grid, axis=axis)
        grad2 = grad2 + g**2
    V = H.tabulate_potential(grid)
    tq = _tq_values(rho_mid, grid, pair_a.hbar, H.m, mask)
    residual = dSdt + grad2 / (2.0 * H.m) + V - tq
    # keep clear of the mask edge: the action's finite-difference stencil
    # must not touch undefined samples
    interior = mask.copy()
    for axis in range(grid.dim):
        for shift in (-2, -1, 1, 2):
            interior &= np.roll(mask, shift, axis=axis)
    vals = residual[interior]
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def qt_expectations(H: Hamiltonian, psi: WaveFunction) -> dict:
    """Position, momentum, force and energy averages of a wave function.

    The momentum is computed along two independent routes that must
    agree: the phase-gradient current quad(hbar Im(psi* grad psi)) and the
    spectral-mode average of hbar k |psi_hat|^2.
    """
    grid = psi.grid
    rho = psi.density
    mesh = grid.meshgrid()
    q_mean = np.array([quadrature(rho * mesh[k], grid) for k in range(grid.dim)])
    p_current = np.array([
        quadrature(psi.hbar * np.imag(np.conj(psi.values)
                                      * spectral_derivative(psi.values, grid, axis=k)), grid)
        for k in range(grid.dim)
    ])
    psi_hat = np.fft.fftn(psi.values)
    power = np.abs(psi_hat) ** 2
    weight = grid.cell_measure / np.prod(grid.shape)
    p_spectral = np.empty(grid.dim)
    kinetic = 0.0
    for axis in range(grid.dim):
        k = grid.wavenumbers(axis)
        shape = [1] * grid.dim
        shape[axis] = len(k)
        kk = k.reshape(shape)
        p_spectral[axis] = psi.hbar * float((kk * power).sum()) * weight
        kinetic += (psi.hbar**2 / (2.0 * H.m)) * float((kk**2 * power).sum()) * weight
    gradV = H.potential.gradient(grid.points_array(), H.m)
    f_mean = np.array([-quadrature(rho * gradV[..., k], grid) for k in range(grid.dim)])
    energy = kinetic + quadrature(rho * H.tabulate_potential(grid), grid)
    return {
        "q": q_mean,
        "p": p_current,
        "p_spectral": p_spectral,
        "F": f_mean,
        "H": float(energy),
    }


# ---------------------------------------------------------------------------
# initial-state catalog


def _normalized(grid: Grid, values: np.ndarray, hbar: float, t: float = 0.0) -> WaveFunction:
    norm = quadrature(np.abs(values) ** 2, grid)
    return WaveFunction(grid, values / np.sqrt(norm), hbar=hbar, t=t)


def gaussian_packet(grid: Grid, hbar: float = 1.0, center=0.0, sigma=1.0,
                    p0=0.0) -> WaveFunction:
    """Minimum-uncertainty packet with position spread sigma per axis."""
    center = np.broadcast_to(np.atleast_1d(np.asarray(center, float)), (grid.dim,))
    sigma = np.broadcast_to(np.atleast_1d(np.asarray(sigma, float)), (grid.dim,))
    p0 = np.broadcast_to(np.atleast_1d(np.asarray(p0, float)), (grid.dim,))
    mesh = grid.meshgrid()
    expo = 0.0
    for k in range(grid.dim):
        dq = mesh[k] - center[k]
        expo = expo - dq**2 / (4.0 * sigma[k] ** 2) + 1j * p0[k] * dq / hbar
    return _normalized(grid, np.exp(expo), hbar)


def coherent_state(grid: Grid, hbar: float = 1.0, m: float = 1.0, omega: float = 1.0,
                   q0=0.0, p0=0.0) -> WaveFunction:
    """Displaced oscillator ground state; its center follows the classical
    orbit q0 cos(wt) + (p0/mw) sin(wt)."""
    sigma = np.sqrt(hbar / (2.0 * m * omega))
    return gaussian_packet(grid, hbar=hbar, center=q0, sigma=sigma, p0=p0)


def eigenstate_n(grid: Grid, n: int = 0, hbar: float = 1.0, m: float = 1.0,
                 omega: float = 1.0) -> WaveFunction:
    """Oscillator eigenstate (1d), from the analytic Hermite catalog."""
    if grid.dim != 1:
        raise ValueError("eigenstates are catalogued for one dimension")
    from numpy.polynomial.hermite import hermval

    q = grid.axis(0)
    xi = np.sqrt(m * omega / hbar) * q
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    values = hermval(xi, coeffs) * np.exp(-0.5 * xi**2)
    return _normalized(grid, values.astype(complex), hbar)


def plane_wave(grid: Grid, hbar: float = 1.0, p0=1.0) -> WaveFunction:
    """Uniform-density state exp(i p0 q / hbar); p0 is snapped to the
    nearest momentum the periodic box supports."""
    p0 = np.broadcast_to(np.atleast_1d(np.asarray(p0, float)), (grid.dim,))
    mesh = grid.meshgrid()
    phase = 0.0
    for k in range(grid.dim):
        quantum = 2.0 * np.pi * hbar / grid.extent[k]
        n_k = np.round(p0[k] / quantum)
        phase = phase + (n_k * quantum) * mesh[k] / hbar
    return _normalized(grid, np.exp(1j * phase), hbar)


def vortex_2d(grid: Grid, hbar: float = 1.0, charge: int = 1, sigma: float = 1.0,
              center=(0.0, 0.0)) -> WaveFunction:
    """((q1 - c1) + i(q2 - c2))^charge times a Gaussian envelope: the phase
    winds `charge` times around the node at the center."""
    if grid.dim != 2:
        raise ValueError("vortex states need a two-dimensional grid")
    X, Y = grid.meshgrid()
    z = (X - center[0]) + 1j * (Y - center[1])
    r2 = np.abs(z) ** 2
    values = z**charge * np.exp(-r2 / (2.0 * sigma**2))
    return _normalized(grid, values, hbar)


QT_STATE_CATALOG = {
    "gaussian_packet": gaussian_packet,
    "coherent_state": coherent_state,
    "eigenstate_n": eigenstate_n,
    "plane_wave": plane_wave,
    "vortex_2d": vortex_2d,
}
