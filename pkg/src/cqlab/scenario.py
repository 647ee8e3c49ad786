"""Scenario files: what to run, on which grids, with which initial data.

A scenario is a JSON document selecting one or more tiers

    PM  - phase-space ensemble (Liouville + action transport),
    QA  - projected Hamilton-Jacobi + continuity by characteristics,
    QT  - linear wave-function evolution,
    CWE - the nonlinear classical-wave variant,

together with a Hamiltonian, grids, catalog initial data, an output
schedule and a list of cross-checks.  Validation is eager and error
messages name the offending key; defaults are filled in and echoed back
into the run report so a report is always self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ScenarioError
from .grid import Grid, NumericsConfig, PhaseGrid
from .hamiltonian import Hamiltonian, potential_from_spec

__all__ = [
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "bundled_scenarios",
    "density_catalog_entry",
    "action_catalog_entry",
    "momentum_catalog_entry",
    "TIERS",
    "CROSS_CHECKS",
]

TIERS = ("PM", "QA", "QT", "CWE")

# every cross-check cites the operation that produces its numbers
CROSS_CHECKS = {
    "ehrenfest": "quantum.qt_expectations",
    "norm_energy": "quantum.evolve_schrodinger",
    "pm_qa_trajectories": "projection.extract_trajectory vs phase_ensemble.integrate_characteristic",
    "qa_cwe_fields": "quantum.evolve_classical_wave vs projection.evolve_hj_continuity",
    "cwe_qt_toggle": "quantum.evolve_classical_wave(coefficient 0) vs quantum.evolve_schrodinger",
    "fisher_identities": "fisher.verify_l0_conditions",
    "caustic_time": "projection.evolve_hj_continuity caustic report",
    "liouville_norm": "phase_ensemble.evolve_liouville",
    "kelvin_qt": "invariants.kelvin_trace_qt",
}


def _require(cond: bool, message: str):
    if not cond:
        raise ScenarioError(message)


def _get(d: dict, key: str, default=None, required: bool = False, where: str = ""):
    if key not in d:
        if required:
            raise ScenarioError(f"{where or 'scenario'}: missing key {key!r}")
        return default
    return d[key]


# ---------------------------------------------------------------------------
# initial-data catalogs (projected tiers); each entry returns callables over
# (..., dim) point arrays, plus analytic derivatives where the seeds need them


def density_catalog_entry(spec: dict, dim: int) -> Callable:
    kind = _get(spec, "type", required=True, where="initial_state.rho0")
    if kind == "gaussian":
        mean = np.broadcast_to(np.atleast_1d(np.asarray(
            _get(spec, "mean", 0.0), dtype=float)), (dim,))
        sigma = np.broadcast_to(np.atleast_1d(np.asarray(
            _get(spec, "sigma", 1.0), dtype=float)), (dim,))
        _require(np.all(sigma > 0), "initial_state.rho0: 'sigma' must be positive")
        norm = float(np.prod(1.0 / (np.sqrt(2.0 * np.pi) * sigma)))

        def rho(pts):
            z = (pts - mean) / sigma
            return norm * np.exp(-0.5 * np.sum(z**2, axis=-1))

        return rho
    raise ScenarioError(
        f"initial_state.rho0: unknown catalog entry {kind!r}; valid: gaussian")


def action_catalog_entry(spec: dict, dim: int):
    """Returns (s0, grad_s0, hess_s0) callables for the action catalog."""
    kind = _get(spec, "type", required=True, where="initial_state.s0")
    if kind == "zero":
        return (lambda pts: np.zeros(pts.shape[:-1]),
                lambda pts: np.zeros_like(pts),
                lambda pts: np.zeros(pts.shape[:-1] + (dim, dim)))
    if kind == "linear":
        slope = np.broadcast_to(np.atleast_1d(np.asarray(
            _get(spec, "slope", 1.0), dtype=float)), (dim,))
        return (lambda pts: np.sum(slope * pts, axis=-1),
                lambda pts: np.broadcast_to(slope, pts.shape).copy(),
                lambda pts: np.zeros(pts.shape[:-1] + (dim, dim)))
    if kind == "quadratic":
        alpha = float(_get(spec, "alpha", 1.0))

        def hess(pts):
            return np.broadcast_to(-alpha * np.eye(dim), pts.shape[:-1] + (dim, dim)).copy()

        return (lambda pts: -0.5 * alpha * np.sum(pts**2, axis=-1),
                lambda pts: -alpha * pts,
                hess)
    if kind == "sine":
        amplitude = float(_get(spec, "amplitude", 0.1))
        length = float(_get(spec, "length", required=True, where="initial_state.s0"))
        k = 2.0 * np.pi / length

        def s0(pts):
            return (amplitude / k) * np.sum(np.sin(k * pts), axis=-1)

        def grad(pts):
            return amplitude * np.cos(k * pts)

        def hess(pts):
            out = np.zeros(pts.shape[:-1] + (dim, dim))
            for i in range(dim):
                out[..., i, i] = -amplitude * k * np.sin(k * pts[..., i])
            return out

        return s0, grad, hess
    raise ScenarioError(
        f"initial_state.s0: unknown catalog entry {kind!r}; valid: zero, linear, quadratic, sine")


def momentum_catalog_entry(spec: dict, dim: int):
    """Returns (m0, grad_m0) callables for the momentum-field catalog."""
    kind = _get(spec, "type", required=True, where="initial_state.m0")
    if kind == "constant":
        value = np.broadcast_to(np.atleast_1d(np.asarray(
            _get(spec, "value", 1.0), dtype=float)), (dim,))
        return (lambda pts: np.broadcast_to(value, pts.shape).copy(),
                lambda pts: np.zeros(pts.shape[:-1] + (dim, dim)))
    if kind == "linear":
        slope = float(_get(spec, "slope", -1.0))
        offset = float(_get(spec, "offset", 0.0))
        return (lambda pts: offset + slope * pts,
                lambda pts: np.broadcast_to(slope * np.eye(dim),
                                            pts.shape[:-1] + (dim, dim)).copy())
    raise ScenarioError(
        f"initial_state.m0: unknown catalog entry {kind!r}; valid: constant, linear")


_QT_STATES = ("gaussian_packet", "coherent_state", "eigenstate_n", "plane_wave", "vortex_2d")


@dataclass(frozen=True)
class Scenario:
    """A validated run request with all defaults filled in."""

    name: str
    tiers: tuple[str, ...]
    hamiltonian: Hamiltonian
    grid: Grid | None
    phase_grid: PhaseGrid | None
    numerics: NumericsConfig
    initial_state: dict
    output_times: tuple[float, ...]
    cross_checks: tuple[str, ...]
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    def echo(self) -> dict:
        """The scenario as it actually ran, defaults included."""
        out = dict(self.raw)
        out["name"] = self.name
        out["tiers"] = list(self.tiers)
        out["numerics"] = {
            "hbar": self.numerics.hbar,
            "dt": self.numerics.dt,
            "t_end": self.numerics.t_end,
            "eps_rho": self.numerics.eps_rho,
            "eps_jac": self.numerics.eps_jac,
            "quadrature_rule": self.numerics.quadrature_rule,
        }
        out["output_times"] = list(self.output_times)
        out["cross_checks"] = list(self.cross_checks)
        out["seed"] = self.seed
        return out


def scenario_from_dict(data: dict, name_hint: str = "scenario") -> Scenario:
    _require(isinstance(data, dict), "scenario file must hold a JSON object")
    known = {"name", "tiers", "hamiltonian", "grid", "phase_grid", "numerics",
             "initial_state", "output", "cross_checks", "seed", "description",
             "expected"}
    for key in data:
        _require(key in known, f"unknown scenario key {key!r}; valid: {sorted(known)}")

    name = _get(data, "name", name_hint)
    tiers = tuple(_get(data, "tiers", ["QT"]))
    for tier in tiers:
        _require(tier in TIERS, f"tiers: unknown tier {tier!r}; valid: {TIERS}")

    # numerics first, defaults echoed
    num_spec = _get(data, "numerics", {})
    try:
        numerics = NumericsConfig(
            hbar=float(_get(num_spec, "hbar", 1.0)),
            dt=float(_get(num_spec, "dt", 1e-3)),
            t_end=float(_get(num_spec, "t_end", 1.0)),
            eps_rho=float(_get(num_spec, "eps_rho", 1e-12)),
            eps_jac=float(_get(num_spec, "eps_jac", 1e-3)),
        )
    except ValueError as exc:
        raise ScenarioError(f"numerics: {exc}") from exc

    grid = None
    if "grid" in data:
        gspec = data["grid"]
        dim = int(_get(gspec, "dim", 1))
        _require(dim in (1, 2),
                 f"grid.dim: unsupported dimension {dim}; the projected tiers support 1 and 2")
        try:
            grid = Grid(dim, _get(gspec, "extent", 40.0), _get(gspec, "points", 512))
        except Exception as exc:
            raise ScenarioError(f"grid: {exc}") from exc

    phase_grid = None
    if "phase_grid" in data:
        pspec = data["phase_grid"]
        try:
            phase_grid = PhaseGrid(
                q=Grid(1, _get(pspec.get("q", {}), "extent", 40.0),
                       _get(pspec.get("q", {}), "points", 256)),
                p=Grid(1, _get(pspec.get("p", {}), "extent", 40.0),
                       _get(pspec.get("p", {}), "points", 256)),
            )
        except Exception as exc:
            raise ScenarioError(f"phase_grid: {exc}") from exc

    needs_grid = {"QA", "QT", "CWE"} & set(tiers)
    _require(not needs_grid or grid is not None,
             f"tiers {sorted(needs_grid)} need a 'grid' section")
    _require("PM" not in tiers or phase_grid is not None,
             "tier PM needs a 'phase_grid' section")

    ham_spec = _get(data, "hamiltonian", required=True, where="scenario")
    mass = float(_get(ham_spec, "mass", 1.0))
    _require(mass > 0, f"hamiltonian.mass must be positive, got {mass}")
    potential = potential_from_spec(
        _get(ham_spec, "potential", required=True, where="hamiltonian"), grid)
    hamiltonian = Hamiltonian(mass, potential)

    istate = dict(_get(data, "initial_state", {}))
    if {"QT", "CWE"} & set(tiers):
        psi_spec = _get(istate, "psi", required=True, where="initial_state")
        kind = _get(psi_spec, "type", required=True, where="initial_state.psi")
        _require(kind in _QT_STATES,
                 f"initial_state.psi: unknown catalog entry {kind!r}; valid: {_QT_STATES}")
        _require(kind != "vortex_2d" or (grid is not None and grid.dim == 2),
                 "initial_state.psi: vortex_2d needs a two-dimensional grid")
    if "QA" in tiers:
        dim = grid.dim
        if "s0" in istate:
            action_catalog_entry(istate["s0"], dim)
            if "rho0" not in istate:
                raise ScenarioError("initial_state: tier QA with s0 also needs rho0")
            density_catalog_entry(istate["rho0"], dim)
        elif "m0" in istate:
            momentum_catalog_entry(istate["m0"], dim)
        else:
            raise ScenarioError("initial_state: tier QA needs either s0 (+rho0) or m0")
    if "PM" in tiers:
        pd = _get(istate, "phase_density", required=True, where="initial_state")
        _require("mean" in pd and "sigma" in pd,
                 "initial_state.phase_density needs 'mean' and 'sigma'")

    out_spec = _get(data, "output", {})
    times = _get(out_spec, "times", None)
    if times is None:
        n_snap = int(_get(out_spec, "snapshots", 5))
        times = list(np.linspace(0.0, numerics.t_end, n_snap))
    times = tuple(float(t) for t in times)
    _require(all(t >= 0 for t in times), "output.times must be non-negative")
    _require(max(times) <= numerics.t_end + 1e-12,
             "output.times may not exceed numerics.t_end")

    checks = tuple(_get(data, "cross_checks", []))
    for c in checks:
        _require(c in CROSS_CHECKS,
                 f"cross_checks: unknown check {c!r}; valid: {sorted(CROSS_CHECKS)}")
    tier_needs = {
        "ehrenfest": {"QT"}, "norm_energy": {"QT"},
        "pm_qa_trajectories": {"QA"}, "qa_cwe_fields": {"QA", "CWE"},
        "cwe_qt_toggle": {"CWE"}, "caustic_time": {"QA"},
        "liouville_norm": {"PM"}, "kelvin_qt": {"QT"}, "fisher_identities": set(),
    }
    for c in checks:
        missing = tier_needs[c] - set(tiers)
        _require(not missing, f"cross_checks: {c!r} needs tiers {sorted(missing)}")

    return Scenario(
        name=str(name),
        tiers=tiers,
        hamiltonian=hamiltonian,
        grid=grid,
        phase_grid=phase_grid,
        numerics=numerics,
        initial_state=istate,
        output_times=times,
        cross_checks=checks,
        seed=int(_get(data, "seed", 0)),
        raw=data,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data, name_hint=path.stem)


def bundled_scenarios() -> dict[str, dict]:
    """Name -> parsed JSON for the scenario files shipped with the package."""
    out = {}
    root = resources.files("cqlab").joinpath("scenarios")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = json.loads(entry.read_text())
    return out
