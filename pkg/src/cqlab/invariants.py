"""Closed material contours and the line integrals they carry.

A contour is an ordered closed polyline advected vertex-by-vertex through
a velocity field; line integrals along it are evaluated with the cyclic
trapezoid rule, which is spectrally accurate for smoothly parametrized
closed curves.  Three families of integrals are traced:

  * the phase-space loop integral of p dq along the canonical flow, which
    is exactly invariant and doubles as an area/energy-free regression
    check on the integrators;
  * its projection onto a momentum surface p = M(q, t): the circulation
    of M along a contour moving with v = M/m, invariant while the surface
    exists (pre-caustic).  Contour vertices seeded on the surface stay on
    it, so the advected vertices carry their own momenta and no Eulerian
    interpolation error enters the trace;
  * the circulation of the phase gradient of a wave function along a
    contour moving with the probability flow, together with the integer
    winding of psi.  Here the phase is undefined at density zeros, so
    entries are flagged when the contour touches the floor mask, and
    winding jumps are recorded rather than suppressed: their existence is
    a measurement, not an assertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import (AdvectionError, CausticError, CirculationUndefinedError,
                     WindingUnreliableError)
from .fields import MomentumField
from .grid import Grid, spectral_derivative
from .hamiltonian import Hamiltonian, force
from .quantum import WaveFunction

__all__ = [
    "Contour",
    "CirculationTrace",
    "circle_contour",
    "advect_contour",
    "line_integral",
    "poincare_invariant",
    "circulation",
    "kelvin_trace_qa",
    "kelvin_trace_qt",
    "winding_number",
    "wavefunction_on_contour",
]


@dataclass(frozen=True)
class Contour:
    """Ordered closed polyline; the last vertex connects back to the first.

    Optional attached per-vertex columns (for example momenta carried on a
    phase surface) are resampled together with the vertices.  `resampled`
    records whether vertices were ever inserted: until then the vertex
    index is a smooth periodic parametrization of the curve, which the
    line integrals exploit.
    """

    points: np.ndarray
    t: float = 0.0
    attached: np.ndarray | None = None
    resampled: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise ValueError("a contour needs at least 3 vertices of shape (n, dim)")
        if self.attached is not None:
            att = np.asarray(self.attached, dtype=float)
            if att.shape[0] != pts.shape[0]:
                raise ValueError("attached columns must match the vertex count")
            object.__setattr__(self, "attached", att)

    def __len__(self):
        return self.points.shape[0]

    @property
    def segment_lengths(self) -> np.ndarray:
        nxt = np.roll(self.points, -1, axis=0)
        return np.linalg.norm(nxt - self.points, axis=1)


def circle_contour(center=(0.0, 0.0), radius: float = 1.0, n: int = 256,
                   clockwise: bool = False) -> Contour:
    """Circle with counterclockwise (mathematical) orientation by default.

    For phase-space loops of a separable Hamiltonian the flow runs
    clockwise in the (q, p) plane, so pass clockwise=True to orient the
    loop with the motion; the loop integral of p dq is then +pi r^2.
    """
    theta = 2.0 * np.pi * np.arange(n) / n
    if clockwise:
        theta = -theta
    center = np.asarray(center, dtype=float)
    pts = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return Contour(points=pts)


def line_integral(values: np.ndarray, contour: Contour, method: str = "auto") -> float:
    """Cyclic trapezoid rule for the loop integral of F . dx.

    Two tangent discretizations: "chord" replaces dx by vertex
    differences (the polyline integral, robust but with an O(n^-2)
    polygon bias), while "spectral" differentiates the vertex coordinates
    in the periodic vertex parameter before applying the same trapezoid
    weights, which is spectrally accurate while the parametrization is
    smooth.  "auto" picks spectral until the contour has been resampled.
    """
    pts = contour.points
    if method == "auto":
        method = "chord" if contour.resampled else "spectral"
    if method == "spectral":
        n = pts.shape[0]
        k = np.fft.fftfreq(n) * n
        k[n // 2] = 0.0
        tangent = np.fft.ifft(1j * k[:, np.newaxis] * np.fft.fft(pts, axis=0), axis=0).real
        return float(np.sum(values * tangent) * (2.0 * np.pi / n))
    nxt_pts = np.roll(pts, -1, axis=0)
    nxt_vals = np.roll(values, -1, axis=0)
    return float(np.sum(0.5 * (values + nxt_vals) * (nxt_pts - pts)))


def _resample_if_needed(pts: np.ndarray, attached: np.ndarray | None,
                        max_len: float):
    """Split every segment longer than max_len with a Catmull-Rom vertex.

    Returns (points, attached, changed).
    """
    nxt = np.roll(pts, -1, axis=0)
    too_long = np.linalg.norm(nxt - pts, axis=1) > max_len
    if not np.any(too_long):
        return pts, attached, False
    cols = pts if attached is None else np.concatenate([pts, attached], axis=1)
    prev = np.roll(cols, 1, axis=0)
    nxt = np.roll(cols, -1, axis=0)
    nxt2 = np.roll(cols, -2, axis=0)
    mid = 0.0625 * (-prev + 9.0 * cols + 9.0 * nxt - nxt2)
    out = []
    for i in range(len(cols)):
        out.append(cols[i])
        if too_long[i]:
            out.append(mid[i])
    out = np.asarray(out)
    d = pts.shape[1]
    if attached is None:
        return out, None, True
    return out[:, :d], out[:, d:], True


def advect_contour(velocity: Callable[[np.ndarray, float], np.ndarray],
                   contour: Contour, t: float, dt: float = 1e-3,
                   resample: bool = True) -> Contour:
    """Advect every vertex with RK4 through velocity(points, time).

    Adaptive resampling keeps the longest segment below twice its initial
    maximum, so shearing flows cannot starve the line integrals of
    vertices.  Attached columns ride along by interpolation.
    """
    pts = contour.points.copy()
    attached = None if contour.attached is None else contour.attached.copy()
    was_resampled = contour.resampled
    max_len = 2.0 * float(contour.segment_lengths.max())
    n = max(1, int(round(abs(t) / dt))) if t != 0.0 else 0
    h = t / n if n else 0.0
    tau = contour.t
    for _ in range(n):
        k1 = velocity(pts, tau)
        k2 = velocity(pts + 0.5 * h * k1, tau + 0.5 * h)
        k3 = velocity(pts + 0.5 * h * k2, tau + 0.5 * h)
        k4 = velocity(pts + h * k3, tau + h)
        if not np.all(np.isfinite(k1)):
            raise AdvectionError(f"velocity not evaluable along the contour at t={tau:.6g}")
        pts = pts + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau += h
        if resample:
            pts, attached, changed = _resample_if_needed(pts, attached, max_len)
            was_resampled = was_resampled or changed
    return Contour(points=pts, t=tau, attached=attached, resampled=was_resampled)


@dataclass(frozen=True)
class CirculationTrace:
    """Time series of a loop integral along an advected contour."""

    times: np.ndarray
    values: np.ndarray
    windings: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.windings is not None:
            w = np.asarray(self.windings)
            if not np.all(np.isnan(w) | (w == np.round(w))):
                raise ValueError("winding entries must be integers (or NaN when flagged)")
            object.__setattr__(self, "windings", w)
        if len(self.flags) not in (0, len(self.times)):
            raise ValueError("flags must be empty or one per sample")

    @property
    def drift(self) -> float:
        valid = self.values[np.isfinite(self.values)]
        return float(np.max(np.abs(valid - valid[0]))) if valid.size else np.nan

    @property
    def relative_drift(self) -> float:
        ref = abs(self.values[0])
        return self.drift / ref if ref > 1e-12 else self.drift

    def winding_jumps(self) -> list[tuple[float, int, int]]:
        """(time, before, after) for every change of the winding integer."""
        if self.windings is None:
            return []
        out = []
        w = self.windings
        for i in range(1, len(w)):
            if np.isnan(w[i]) or np.isnan(w[i - 1]):
                continue
            if w[i] != w[i - 1]:
                out.append((float(self.times[i]), int(w[i - 1]), int(w[i])))
        return out


def _trace_sorted_times(times: Sequence[float]) -> np.ndarray:
    times = np.asarray(sorted(float(t) for t in times))
    if times.size == 0 or times[0] < 0:
        raise ValueError("trace times must be non-negative and non-empty")
    return times


def poincare_invariant(H: Hamiltonian, contour: Contour, times: Sequence[float],
                       dt: float = 1e-3) -> CirculationTrace:
    """Loop integral of p dq along a phase-space contour moving with the
    canonical flow; constant for any Hamiltonian, here traced numerically.

    The contour lives in the (q, p) plane of a one-degree-of-freedom
    system: column 0 is q, column 1 is p.
    """
    times = _trace_sorted_times(times)

    def velocity(pts, tau):
        q, p = pts[:, :1], pts[:, 1:]
        return np.concatenate([p / H.m, force(H, q)], axis=1)

    values = []
    current = contour
    for t_k in times:
        current = advect_contour(velocity, current, t_k - current.t, dt=dt)
        values.append(line_integral(
            np.concatenate([current.points[:, 1:], np.zeros_like(current.points[:, 1:])],
                           axis=1),
            current))
    return CirculationTrace(times=times, values=np.asarray(values))


def _field_on_contour(provider, contour: Contour) -> np.ndarray:
    if isinstance(provider, MomentumField):
        grid = provider.grid
        pts = contour.points
        coords = [(pts[:, k] - grid.axis(k)[0]) / grid.spacing[k] for k in range(grid.dim)]
        if provider.mask is not None:
            hit = ndimage.map_coordinates(
                (~provider.mask).astype(float), np.array(coords), order=1, mode="grid-wrap")
            if np.any(hit > 0.0):
                raise CirculationUndefinedError("contour touches the field mask")
        return np.stack([
            ndimage.map_coordinates(provider.values[..., c], np.array(coords),
                                    order=3, mode="grid-wrap")
            for c in range(grid.dim)
        ], axis=-1)
    return np.asarray(provider(contour.points), dtype=float)


def circulation(provider, contour: Contour) -> float:
    """Loop integral of M . dq; provider is a MomentumField or a callable
    mapping vertex positions to field values."""
    return line_integral(_field_on_contour(provider, contour), contour)


def kelvin_trace_qa(H: Hamiltonian, M0: Callable[[np.ndarray], np.ndarray],
                    contour: Contour, times: Sequence[float], dt: float = 1e-3,
                    caustic_t: float | None = None) -> CirculationTrace:
    """Circulation of the momentum field along a contour moving with the
    projected flow v = M/m, traced from the initial field.

    The vertices are lifted onto the surface p = M0(q) and advected
    canonically; while the surface exists (pre-caustic) they remain on
    it, so the vertex momenta are the field values along the moving
    contour.  If a caustic time is supplied, samples beyond it are
    refused (truncated trace, flagged).
    """
    times = _trace_sorted_times(times)
    pts = contour.points
    p = np.asarray(M0(pts), dtype=float).reshape(pts.shape)
    lifted = Contour(points=pts, t=contour.t, attached=p)

    values = []
    flags = []
    current = lifted
    for t_k in times:
        span = t_k - current.t
        if caustic_t is not None and t_k >= caustic_t:
            values.append(np.nan)
            flags.append("caustic")
            continue
        current = _advect_lifted(H, current, span, dt)
        values.append(line_integral(current.attached, current))
        flags.append("")
    return CirculationTrace(times=times, values=np.asarray(values), flags=tuple(flags))


def _advect_lifted(H: Hamiltonian, contour: Contour, t: float, dt: float) -> Contour:
    """Advance a configuration-space contour carrying momenta canonically."""
    n = max(1, int(round(abs(t) / dt))) if t != 0.0 else 0
    h = t / n if n else 0.0
    q = contour.points.copy()
    p = contour.attached.copy()
    was_resampled = contour.resampled
    max_len = 2.0 * float(contour.segment_lengths.max())
    for _ in range(n):
        k1q, k1p = p / H.m, force(H, q)
        k2q, k2p = (p + 0.5 * h * k1p) / H.m, force(H, q + 0.5 * h * k1q)
        k3q, k3p = (p + 0.5 * h * k2p) / H.m, force(H, q + 0.5 * h * k2q)
        k4q, k4p = (p + h * k3p) / H.m, force(H, q + h * k3q)
        q = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        q, p, changed = _resample_if_needed(q, p, max_len)
        was_resampled = was_resampled or changed
    return Contour(points=q, t=contour.t + t, attached=p, resampled=was_resampled)


def wavefunction_on_contour(psi: WaveFunction, pts: np.ndarray) -> np.ndarray:
    """Complex psi along arbitrary points, cubic-spline periodic lookup."""
    grid = psi.grid
    coords = np.array([(pts[:, k] - grid.axis(k)[0]) / grid.spacing[k]
                       for k in range(grid.dim)])
    re = ndimage.map_coordinates(psi.values.real, coords, order=3, mode="grid-wrap")
    im = ndimage.map_coordinates(psi.values.imag, coords, order=3, mode="grid-wrap")
    return re + 1j * im


def winding_number(psi, contour: Contour, eps_amp: float = 1e-9,
                   max_residue: float = 0.05) -> int:
    """Accumulated phase of psi around the contour in whole turns.

    psi is a WaveFunction (interpolated along the vertices) or a callable
    over points.  The accumulated wrapped phase must land within
    max_residue of an integer multiple of 2*pi, otherwise the winding is
    unreliable and an error is raised.
    """
    if isinstance(psi, WaveFunction):
        values = wavefunction_on_contour(psi, contour.points)
        floor = eps_amp * float(np.max(np.abs(psi.values)))
    else:
        values = np.asarray(psi(contour.points))
        floor = eps_amp * float(np.max(np.abs(values)))
    if np.any(np.abs(values) <= floor):
        raise WindingUnreliableError("contour touches an amplitude zero")
    phases = np.angle(values)
    diffs = np.angle(np.exp(1j * np.diff(np.concatenate([phases, phases[:1]]))))
    total = float(diffs.sum()) / (2.0 * np.pi)
    w = int(np.round(total))
    residue = abs(total - w)
    if residue >= max_residue:
        raise WindingUnreliableError(
            f"phase accumulates {total:.4f} turns, {residue:.3f} away from an integer")
    return w


def kelvin_trace_qt(H: Hamiltonian, psi0: WaveFunction, contour: Contour,
                    times: Sequence[float], dt: float = 1e-3,
                    eps_rho: float = 1e-12) -> CirculationTrace:
    """Circulation of the phase gradient and winding of psi along a contour
    moving with the probability flow grad(S)/m.

    The wave function is evolved by the linear equation in lockstep with
    the contour (Heun steps through the discrete snapshots).  Samples
    where the contour touches the density floor are flagged and carry NaN
    circulation; winding jumps between samples are legitimate data and are
    exposed via CirculationTrace.winding_jumps().
    """
    from .quantum import evolve_schrodinger

    times = _trace_sorted_times(times)
    grid = psi0.grid
    if grid.dim != 2:
        raise ValueError("probability-flow contour traces are defined in two dimensions")

    def flow_field(psi: WaveFunction):
        rho = psi.density
        floor = eps_rho * rho.max()
        comps = []
        for axis in range(2):
            j = psi.hbar * np.imag(np.conj(psi.values)
                                   * spectral_derivative(psi.values, grid, axis=axis))
            comps.append(j)

        def at(pts):
            coords = np.array([(pts[:, k] - grid.axis(k)[0]) / grid.spacing[k]
                               for k in range(2)])
            rho_i = ndimage.map_coordinates(rho, coords, order=3, mode="grid-wrap")
            out = np.zeros_like(pts)
            ok = rho_i > floor
            for axis in range(2):
                j_i = ndimage.map_coordinates(comps[axis], coords, order=3, mode="grid-wrap")
                out[:, axis] = np.where(ok, j_i / np.maximum(rho_i, floor), 0.0)
            return out, ok

        return at

    psi = psi0
    current = contour
    max_len = 2.0 * float(contour.segment_lengths.max())
    values, windings, flags = [], [], []
    tau = contour.t
    for t_k in times:
        span = t_k - tau
        n = max(1, int(round(span / dt))) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            at_now = flow_field(psi)
            v1, _ = at_now(current.points)
            psi = evolve_schrodinger(H, psi, h, dt=h)
            at_next = flow_field(psi)
            v2, _ = at_next(current.points + h * v1)
            pts = current.points + 0.5 * h * (v1 + v2)
            pts, att, changed = _resample_if_needed(pts, current.attached, max_len)
            current = Contour(points=pts, t=current.t + h, attached=att,
                              resampled=current.resampled or changed)
        tau = t_k
        at_now = flow_field(psi)
        gradS, ok = at_now(current.points)
        gradS = gradS * H.m  # back from velocity to momentum units
        if np.all(ok):
            values.append(line_integral(gradS, current))
            flag = ""
        else:
            values.append(np.nan)
            flag = "mask"
        try:
            windings.append(winding_number(psi, current))
        except WindingUnreliableError:
            windings.append(np.nan)
            flag = (flag + "+winding") if flag else "winding"
        flags.append(flag)
    return CirculationTrace(times=times, values=np.asarray(values),
                            windings=np.asarray(windings, dtype=float),
                            flags=tuple(flags))
