"""Uniform periodic grids with FFT-collocation calculus.

Every solver in the package shares the same discretization: a uniform
lattice on a periodic box [-L/2, L/2) per axis, spectral (Fourier)
differentiation, and the periodic rectangle rule for quadrature.  The
rectangle rule is spectrally accurate for smooth periodic integrands, so
there is a single quadrature everywhere and no tie-breaking between rules.

Localized scenarios must choose the box large enough that all fields are
below ~1e-12 at the boundary; the periodic wrap is then invisible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError

__all__ = [
    "Grid",
    "PhaseGrid",
    "NumericsConfig",
    "spectral_derivative",
    "quadrature",
    "spectral_shift",
    "gradient_fd",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def _as_tuple(value, dim: int, name: str) -> tuple:
    if np.isscalar(value):
        return (value,) * dim
    value = tuple(value)
    if len(value) != dim:
        raise GridError(f"{name} must be a scalar or a {dim}-tuple, got {value!r}")
    return value


@dataclass(frozen=True)
class Grid:
    """Uniform periodic sample lattice over [-L/2, L/2)^dim.

    Point counts must be powers of two (fast transforms, clean resolution
    ladders); indices wrap modulo the count.
    """

    dim: int
    extent: tuple[float, ...]
    points: tuple[int, ...]

    def __init__(self, dim: int, extent, points):
        if dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {dim}")
        extent = tuple(float(L) for L in _as_tuple(extent, dim, "extent"))
        points = tuple(int(n) for n in _as_tuple(points, dim, "points"))
        for L in extent:
            if not L > 0:
                raise GridError(f"extent must be positive, got {L}")
        for n in points:
            if not _is_power_of_two(n):
                raise GridError(f"points per axis must be a power of two, got {n}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points", points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extent, self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, k: int = 0) -> np.ndarray:
        """Sample coordinates along axis k: -L/2, ..., L/2 - h."""
        n, h = self.points[k], self.spacing[k]
        return (np.arange(n) - n // 2) * h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij"))

    def points_array(self) -> np.ndarray:
        """All node coordinates, shape (*shape, dim)."""
        return np.stack(self.meshgrid(), axis=-1)

    def wavenumbers(self, k: int = 0) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points[k], d=self.spacing[k])


def spectral_derivative(field: np.ndarray, grid: Grid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Fourier-collocation derivative along one grid axis.

    Exact for band-limited periodic fields.  For odd orders the Nyquist
    mode is zeroed (its derivative is not representable on the lattice),
    which also keeps real inputs exactly real.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if field.shape != grid.shape:
        raise GridError(f"field shape {field.shape} does not match grid {grid.shape}")
    k = grid.wavenumbers(axis)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[grid.points[axis] // 2] = 0.0
    shape = [1] * grid.dim
    shape[axis] = len(k)
    out = np.fft.ifft(mult.reshape(shape) * np.fft.fft(field, axis=axis), axis=axis)
    return out.real if np.isrealobj(field) else out


def quadrature(field: np.ndarray, grid: Grid) -> float | complex:
    """Periodic rectangle rule: cell measure times the sample sum."""
    if field.shape != grid.shape:
        raise GridError(f"field shape {field.shape} does not match grid {grid.shape}")
    total = field.sum() * grid.cell_measure
    return complex(total) if np.iscomplexobj(field) else float(total)


def spectral_shift(field: np.ndarray, grid: Grid, axis: int, delta: float) -> np.ndarray:
    """Translate samples by delta along an axis: f(q) -> f(q - delta).

    Exact for band-limited fields; delta need not be a multiple of the
    spacing.
    """
    k = grid.wavenumbers(axis)
    shape = [1] * grid.dim
    shape[axis] = len(k)
    phase = np.exp(-1j * k * delta).reshape(shape)
    out = np.fft.ifft(phase * np.fft.fft(field, axis=axis), axis=axis)
    return out.real if np.isrealobj(field) else out


def gradient_fd(field: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    """Fourth-order centered finite difference with periodic wrap.

    Used for fields that are smooth but not periodic over the box (for
    example an action that grows like q^2): the error stays local to the
    seam, unlike the FFT derivative which pollutes the whole domain.
    """
    h = grid.spacing[axis]
    r = lambda s: np.roll(field, -s, axis=axis)
    return (8.0 * (r(1) - r(-1)) - (r(2) - r(-2))) / (12.0 * h)


@dataclass(frozen=True)
class PhaseGrid:
    """Cartesian product of a position grid and a momentum grid (n = 1)."""

    q: Grid
    p: Grid

    def __post_init__(self):
        if self.q.dim != 1 or self.p.dim != 1:
            raise GridError("phase grids are built from two 1-dimensional grids")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.q.points[0], self.p.points[0])

    @property
    def cell_measure(self) -> float:
        return self.q.cell_measure * self.p.cell_measure

    @property
    def volume(self) -> float:
        return self.q.extent[0] * self.p.extent[0]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.q.axis(), self.p.axis(), indexing="ij")

    def quadrature(self, field: np.ndarray) -> float | complex:
        if field.shape != self.shape:
            raise GridError(f"field shape {field.shape} does not match phase grid {self.shape}")
        total = field.sum() * self.cell_measure
        return complex(total) if np.iscomplexobj(field) else float(total)


@dataclass(frozen=True)
class NumericsConfig:
    """Shared numerical knobs.

    hbar enters only through the wave-function tier; eps_rho is the
    relative density floor below which the phase is treated as undefined;
    eps_jac is the |det J| threshold that declares a caustic.
    """

    hbar: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    eps_rho: float = 1e-12
    eps_jac: float = 1e-3
    quadrature_rule: str = "periodic_rectangle"

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.eps_rho < 1e-2:
            raise ValueError(f"eps_rho must sit in (0, 1e-2), got {self.eps_rho}")
        if not self.eps_jac > 0:
            raise ValueError(f"eps_jac must be positive, got {self.eps_jac}")
        if self.quadrature_rule != "periodic_rectangle":
            raise ValueError(f"unknown quadrature rule {self.quadrature_rule!r}")
