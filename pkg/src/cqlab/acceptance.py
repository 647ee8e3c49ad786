"""The bundled acceptance suite: one function per release criterion.

Each criterion pins its scenario, its oracle and its tolerance here, in
code, and reports a single worst-case measured number.  The suite runs
identically under `cqlab verify` and under pytest; a criterion that
cannot meet its tolerance is reported red, never loosened.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .clebsch import enumerate_class_solutions, regular_solution, variable_count
from .fields import ConfigDensity
from .fisher import entropy, fisher_info, kl_shift, verify_l0_conditions
from .grid import Grid, NumericsConfig, PhaseGrid, quadrature
from .hamiltonian import Hamiltonian, Potential
from .invariants import (circle_contour, circulation, kelvin_trace_qa,
                         kelvin_trace_qt, poincare_invariant, winding_number)
from .phase_ensemble import (PhaseDensity, PhaseState, evolve_liouville, expectation,
                             integrate_characteristic, monte_carlo_expectations)
from .projection import evolve_canonical_condition, evolve_hj_continuity, extract_trajectory
from .quantum import (coherent_state, evolve_classical_wave, evolve_schrodinger,
                      gaussian_packet, madelung_decompose, modified_hj_residual,
                      plane_wave, qt_expectations, quantum_potential, vortex_2d)

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "list_criteria"]


@dataclass
class CriterionResult:
    cid: str
    description: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.cid:<22s} measured {self.measured:.3e} "
                f"tol {self.tolerance:.1e}  ({self.seconds:.1f}s) {self.detail}")


def _result(cid, desc, measured, tol, detail="") -> CriterionResult:
    return CriterionResult(cid, desc, float(measured), float(tol),
                           bool(measured < tol), detail)


_FREE = Hamiltonian(1.0, Potential("free"))
_HARMONIC = Hamiltonian(1.0, Potential("harmonic", {"omega": 1.0}))


def poincare_circle(ctx) -> CriterionResult:
    """Harmonic flow, phase circle r=1: loop integral of p dq stays pi."""
    contour = circle_contour((0.0, 0.0), 1.0, 256, clockwise=True)
    trace = poincare_invariant(_HARMONIC, contour, np.linspace(0.0, 2.0 * np.pi, 13),
                               dt=1e-3)
    value_err = abs(trace.values[0] - np.pi)
    measured = max(trace.relative_drift, value_err)
    return _result("poincare_circle", poincare_circle.__doc__, measured, 1e-6,
                   f"value err {value_err:.2e}, drift {trace.relative_drift:.2e}")


def caustic_focusing(ctx) -> CriterionResult:
    """Free focusing field M0=-q: caustic in [0.99, 1.01], field -q/(1-t)."""
    grid = Grid(1, 40.0, 512)
    numerics = NumericsConfig(dt=1e-3, eps_jac=ctx.get("eps_jac", 1e-3))
    ev = evolve_canonical_condition(_FREE, lambda pts: -pts, 1.05, grid=grid,
                                    numerics=numerics,
                                    grad_M0=lambda pts: np.broadcast_to(
                                        -np.eye(1), pts.shape[:-1] + (1, 1)).copy())
    t_star = ev.report.t_star
    window_ok = t_star is not None and 0.99 <= t_star <= 1.01
    ev_half = evolve_canonical_condition(_FREE, lambda pts: -pts, 0.5, grid=grid,
                                         numerics=numerics)
    f = ev_half.field
    q = grid.axis(0)
    field_err = float(np.max(np.abs(f.values[..., 0] + 2.0 * q)[f.valid]))
    measured = field_err if window_ok else np.inf
    return _result("caustic_focusing", caustic_focusing.__doc__, measured, 1e-5,
                   f"t*={t_star}, field err {field_err:.2e}")


def pm_superset_qa(ctx) -> CriterionResult:
    """Trajectories through the evolved field match canonical ones to 1e-6."""
    numerics = NumericsConfig(dt=1e-3)
    grid = Grid(1, 40.0, 512)
    worst = 0.0
    detail = []
    for H, m0, gm0, t_star, tag in [
        (_FREE, lambda pts: -pts,
         lambda pts: np.broadcast_to(-np.eye(1), pts.shape[:-1] + (1, 1)).copy(),
         0.999, "free"),
        (_HARMONIC, lambda pts: np.zeros_like(pts),
         lambda pts: np.zeros(pts.shape[:-1] + (1, 1)), float(np.arccos(1e-3)), "harmonic"),
    ]:
        horizon = 0.9 * t_star
        ev = evolve_canonical_condition(H, m0, horizon, grid=grid, numerics=numerics,
                                        grad_M0=gm0)
        q0 = 1.0
        traj = extract_trajectory(H, ev, q0, horizon, dt=1e-3)
        ref = integrate_characteristic(H, PhaseState(np.array([q0]),
                                                     m0(np.array([[q0]]))[0]), horizon,
                                       dt=1e-3)
        dev = max(float(np.abs(traj.q[-1] - ref.q).max()),
                  float(np.abs(traj.p[-1] - ref.p).max()))
        worst = max(worst, dev)
        detail.append(f"{tag} {dev:.2e}")
    return _result("pm_superset_qa", pm_superset_qa.__doc__, worst, 1e-6,
                   ", ".join(detail))


def schrodinger_baseline(ctx) -> CriterionResult:
    """Coherent-state center follows cos t; free packet spreads to sqrt(2)."""
    grid = Grid(1, 40.0, 512)
    psi = coherent_state(grid, q0=1.0)
    e0 = qt_expectations(_HARMONIC, psi)
    worst_q = 0.0
    norm_drift = 0.0
    energy_drift = 0.0
    for t in np.linspace(np.pi / 8.0, 2.0 * np.pi, 16):
        psi = evolve_schrodinger(_HARMONIC, psi, t - psi.t, dt=2e-4)
        e = qt_expectations(_HARMONIC, psi)
        worst_q = max(worst_q, abs(e["q"][0] - np.cos(t)))
        norm_drift = max(norm_drift, abs(quadrature(psi.density, grid) - 1.0))
        energy_drift = max(energy_drift, abs(e["H"] - e0["H"]) / abs(e0["H"]))
    packet = gaussian_packet(grid, sigma=1.0)
    spread = evolve_schrodinger(_FREE, packet, 2.0, dt=1e-3)
    q = grid.axis(0)
    e = qt_expectations(_FREE, spread)
    var = quadrature(spread.density * q**2, grid) - e["q"][0] ** 2
    sigma_err = abs(np.sqrt(var) - np.sqrt(2.0))
    ok = (worst_q < 1e-6 and norm_drift < 1e-10 and energy_drift < 1e-8
          and sigma_err < 1e-6)
    return _result("schrodinger_baseline", schrodinger_baseline.__doc__,
                   max(worst_q, sigma_err) if ok else np.inf, 1e-6,
                   f"<q> {worst_q:.2e}, norm {norm_drift:.1e}, "
                   f"energy {energy_drift:.1e}, sigma {sigma_err:.2e}")


def ehrenfest(ctx) -> CriterionResult:
    """d<q>/dt = <p>/m and d<p>/dt = <F> for harmonic and quartic wells."""
    grid = Grid(1, 40.0, 512)
    delta = 1e-3
    worst = 0.0
    for H, psi0 in [
        (_HARMONIC, coherent_state(grid, q0=1.0)),
        (Hamiltonian(1.0, Potential("quartic", {"lam": 1.0})),
         gaussian_packet(grid, center=1.0, sigma=0.7)),
    ]:
        psi = psi0
        for t in (0.2, 0.4):
            before = evolve_schrodinger(H, psi, t - delta - psi.t, dt=1e-3)
            center = evolve_schrodinger(H, before, delta, dt=delta)
            after = evolve_schrodinger(H, center, delta, dt=delta)
            eb, ec, ea = (qt_expectations(H, x) for x in (before, center, after))
            r1 = abs((ea["q"][0] - eb["q"][0]) / (2 * delta) - ec["p"][0] / H.m)
            r2 = abs((ea["p"][0] - eb["p"][0]) / (2 * delta) - ec["F"][0])
            worst = max(worst, r1, r2)
            psi = before
    return _result("ehrenfest", ehrenfest.__doc__, worst, 1e-5)


def linearization_identity(ctx) -> CriterionResult:
    """Zero coefficient reproduces the linear path; constant density too."""
    grid = Grid(1, 40.0, 512)
    psi0 = gaussian_packet(grid, sigma=1.0, p0=0.5)
    a = evolve_classical_wave(_HARMONIC, psi0, 0.4, dt=1e-3, nonlinear_coefficient=0.0)
    b = evolve_schrodinger(_HARMONIC, psi0, 0.4, dt=1e-3)
    toggle_dev = float(np.max(np.abs(a.values - b.values)))
    gpw = Grid(1, 16.0 * np.pi, 512)
    pw = plane_wave(gpw, p0=1.0)
    c = evolve_classical_wave(_FREE, pw, 1.0, dt=1e-3)
    d = evolve_schrodinger(_FREE, pw, 1.0, dt=1e-3)
    const_dev = float(np.max(np.abs(c.values - d.values)))
    ok = toggle_dev <= 1e-12 and const_dev <= 1e-10
    return _result("linearization_identity", linearization_identity.__doc__,
                   max(toggle_dev, const_dev) if ok else np.inf, 1e-10,
                   f"toggle {toggle_dev:.1e}, constant-rho {const_dev:.1e}")


def qa_cwe_equivalence(ctx) -> CriterionResult:
    """Nonlinear-wave Madelung fields match the characteristics fields."""
    grid = Grid(1, 40.0, 512)
    numerics = NumericsConfig(dt=1e-3)
    rho0 = lambda pts: np.exp(-0.5 * np.sum(pts**2, axis=-1)) / np.sqrt(2.0 * np.pi)
    ev = evolve_hj_continuity(_FREE, lambda pts: np.zeros(pts.shape[:-1]), rho0, 0.5,
                              grid=grid, numerics=numerics,
                              grad_S0=lambda pts: np.zeros_like(pts),
                              hess_S0=lambda pts: np.zeros(pts.shape[:-1] + (1, 1)),
                              oversample=8)
    psi0 = gaussian_packet(grid, sigma=1.0)
    cw = evolve_classical_wave(_FREE, psi0, 0.5, dt=1e-3)
    pair = madelung_decompose(cw)
    # compare above the splitting-noise support (phase is noise below)
    rho_cw = pair.density.values
    both = (pair.mask & ev.masks[-1] & (rho_cw >= 1e-8 * rho_cw.max())
            & (ev.density[-1] >= 1e-8 * np.nanmax(ev.density[-1])))
    dev_rho = float(np.max(np.abs(pair.density.values - ev.density[-1])[both]))
    ds = pair.action.values - ev.action[-1]
    ds = ds - np.median(ds[both])
    dev_s = float(np.max(np.abs(ds[both])))
    measured = max(dev_rho, dev_s)
    return _result("qa_cwe_equivalence", qa_cwe_equivalence.__doc__, measured, 5e-3,
                   f"rho {dev_rho:.2e}, S {dev_s:.2e} (no caustic: static flow)")


def modified_hj(ctx) -> CriterionResult:
    """Wave-function Madelung fields satisfy the corrected eikonal equation."""
    grid = Grid(1, 40.0, 512)
    psi = coherent_state(grid, q0=1.0)
    delta = 1e-3
    base = evolve_schrodinger(_HARMONIC, psi, 0.5 - delta, dt=1e-3)
    later = evolve_schrodinger(_HARMONIC, base, 2 * delta, dt=delta)
    residual = modified_hj_residual(madelung_decompose(base),
                                    madelung_decompose(later), _HARMONIC)
    q = grid.axis(0)
    rho = ConfigDensity(grid, np.exp(-0.5 * q**2) / np.sqrt(2.0 * np.pi), norm_tol=1e-6)
    tq = quantum_potential(rho, hbar=1.0, m=1.0)
    tq_err = abs(tq[np.argmin(np.abs(q))] + 0.25)
    ok = residual < 1e-4 and tq_err < 1e-8
    return _result("modified_hj", modified_hj.__doc__,
                   residual if ok else np.inf, 1e-4,
                   f"residual {residual:.2e}, T_Q(0) err {tq_err:.2e}")


def fisher_suite(ctx) -> CriterionResult:
    """Gaussian Fisher/entropy values and the additive-term identities."""
    grid = Grid(1, 40.0, 1024)
    q = grid.axis(0)
    worst_rel = 0.0
    worst_ident = 0.0
    for sigma in (0.5, 1.0, 2.0):
        vals = np.exp(-0.5 * (q / sigma) ** 2) / (np.sqrt(2.0 * np.pi) * sigma)
        rho = ConfigDensity(grid, vals, norm_tol=1e-9)
        worst_rel = max(worst_rel, abs(fisher_info(rho) - 1.0 / sigma**2))
        rep = verify_l0_conditions(rho, B0=0.25)
        worst_ident = max(worst_ident, rep.l0_identity_residual, *rep.constraint_residual)
    rho1 = ConfigDensity(grid, np.exp(-0.5 * q**2) / np.sqrt(2.0 * np.pi), norm_tol=1e-9)
    ent_err = abs(entropy(rho1) - 0.5 * np.log(2.0 * np.pi * np.e))
    shift = kl_shift(rho1, axis=0, dq=1e-3)
    shift_rel = abs(shift / 1e-6 + 0.5) / 0.5
    ok = worst_rel < 1e-6 and worst_ident < 1e-8 and ent_err < 1e-6 and shift_rel < 1e-3
    return _result("fisher_suite", fisher_suite.__doc__,
                   max(worst_rel, ent_err) if ok else np.inf, 1e-6,
                   f"I {worst_rel:.1e}, identities {worst_ident:.1e}, "
                   f"entropy {ent_err:.1e}, shift rel {shift_rel:.1e}")


def clebsch_tables(ctx) -> CriterionResult:
    """Potential-count arithmetic: enumerations, regular family, increments."""
    expected = {
        1: {(0, 1)},
        2: {(1, 2), (3, 1)},
        3: {(0, 4), (2, 3), (4, 2), (6, 1)},
    }
    errors = 0
    for N, want in expected.items():
        got = {(s.k, s.m) for s in enumerate_class_solutions(N)}
        errors += got != want
    for N in range(1, 101):
        sol = regular_solution(N)
        errors += not (sol.k == N - 1 and sol.m == N)
        if N > 1:
            errors += (variable_count(regular_solution(N))
                       - variable_count(regular_solution(N - 1))) != 2
    return _result("clebsch_tables", clebsch_tables.__doc__, float(errors), 0.5,
                   "exact integer comparisons")


def circulation_winding(ctx) -> CriterionResult:
    """Gradient loops vanish, the point vortex carries 2 pi, windings count."""
    gradS = lambda pts: -2.0 * pts * np.exp(-np.sum(pts**2, axis=-1))[..., None]
    c_grad = abs(circulation(gradS, circle_contour((0.3, 0.1), 0.8, 256)))
    vortex = lambda pts: (np.stack([-pts[:, 1], pts[:, 0]], axis=-1)
                          / np.sum(pts**2, axis=-1)[..., None])
    c_vortex = abs(circulation(vortex, circle_contour((0.0, 0.0), 1.0, 256)) - 2.0 * np.pi)
    wind_err = 0
    for k in (0, 1, 2):
        f = (lambda kk: lambda pts: ((pts[:, 0] + 1j * pts[:, 1]) ** kk
                                     if kk else np.ones(len(pts), complex)))(k)
        wind_err += winding_number(f, circle_contour((0.0, 0.0), 1.0, 256)) != k
    L = 20.0
    k_wave = 2.0 * np.pi / L

    def m0(pts):
        x, y = pts[..., 0], pts[..., 1]
        return 0.05 * np.stack([np.cos(k_wave * x) * np.cos(k_wave * y),
                                -np.sin(k_wave * x) * np.sin(k_wave * y)], axis=-1)

    trace = kelvin_trace_qa(_FREE, m0, circle_contour((1.0, 0.5), 2.0, 256),
                            [0.0, 0.25, 0.5], dt=1e-3)
    ok = (c_grad < 1e-10 and c_vortex < 1e-6 and wind_err == 0 and trace.drift < 1e-6)
    measured = max(c_grad, c_vortex, trace.drift)
    return _result("circulation_winding", circulation_winding.__doc__,
                   measured if ok else np.inf, 1e-6,
                   f"grad {c_grad:.1e}, vortex {c_vortex:.1e}, "
                   f"kelvin drift {trace.drift:.1e}, winding errors {wind_err}")


def liouville_vs_montecarlo(ctx) -> CriterionResult:
    """Grid expectations match 1e6 sampled characteristics (free shear)."""
    pg = PhaseGrid(Grid(1, 48.0, 256), Grid(1, 48.0, 256))
    Q, P = pg.meshgrid()
    sigma = 1.5
    vals = np.exp(-((Q - 0.0) ** 2 + (P - 1.0) ** 2) / (2.0 * sigma**2))
    vals /= pg.quadrature(vals)
    rho = PhaseDensity(pg, vals)
    rho_t = evolve_liouville(_FREE, rho, 2.0, dt=1e-2)
    energy = (P**2) / 2.0
    grid_vals = {
        "q": expectation(rho_t, Q),
        "p": expectation(rho_t, P),
        "H": expectation(rho_t, energy),
    }

    def sampler(rng, n):
        q = rng.normal(0.0, sigma, size=(n, 1))
        p = rng.normal(1.0, sigma, size=(n, 1))
        return q, p

    mc = monte_carlo_expectations(_FREE, sampler, 1_000_000, 2.0, dt=1e-2,
                                  method="verlet", seed=ctx.get("seed", 20240801))
    worst = 0.0
    detail = []
    for key in ("q", "p", "H"):
        mean, se = mc[key]
        pulls = abs(grid_vals[key] - mean) / se
        worst = max(worst, pulls)
        detail.append(f"{key}: {pulls:.2f} se")
    return _result("liouville_vs_montecarlo", liouville_vs_montecarlo.__doc__,
                   worst, 3.0, ", ".join(detail))


def qt_winding_trace(ctx) -> CriterionResult:
    """2d vortex run yields a well-formed integer winding trace."""
    grid = Grid(2, 24.0, 128)
    psi0 = vortex_2d(grid, charge=1, sigma=1.0)
    trace = kelvin_trace_qt(_HARMONIC, psi0, circle_contour((0.0, 0.0), 1.0, 256),
                            [0.0, 0.5, 1.0], dt=2e-3)
    defined = ~np.isnan(trace.windings)
    well_formed = bool(np.all(defined)) and all(f == "" for f in trace.flags)
    jumps = trace.winding_jumps()
    return _result("qt_winding_trace", qt_winding_trace.__doc__,
                   0.0 if well_formed else np.inf, 0.5,
                   f"windings {[None if np.isnan(w) else int(w) for w in trace.windings]}, "
                   f"jumps {jumps}")


CRITERIA: list[tuple[str, Callable]] = [
    ("poincare_circle", poincare_circle),
    ("caustic_focusing", caustic_focusing),
    ("pm_superset_qa", pm_superset_qa),
    ("schrodinger_baseline", schrodinger_baseline),
    ("ehrenfest", ehrenfest),
    ("linearization_identity", linearization_identity),
    ("qa_cwe_equivalence", qa_cwe_equivalence),
    ("modified_hj", modified_hj),
    ("fisher_suite", fisher_suite),
    ("clebsch_tables", clebsch_tables),
    ("circulation_winding", circulation_winding),
    ("liouville_vs_montecarlo", liouville_vs_montecarlo),
    ("qt_winding_trace", qt_winding_trace),
]


def list_criteria() -> list[tuple[str, str]]:
    return [(cid, fn.__doc__.strip()) for cid, fn in CRITERIA]


def run_criterion(cid: str, ctx: dict | None = None) -> CriterionResult:
    ctx = ctx or {}
    for name, fn in CRITERIA:
        if name == cid:
            start = time.perf_counter()
            result = fn(ctx)
            result.seconds = time.perf_counter() - start
            return result
    raise KeyError(f"unknown criterion {cid!r}")


def run_all(ctx: dict | None = None) -> list[CriterionResult]:
    return [run_criterion(cid, ctx) for cid, _ in CRITERIA]
