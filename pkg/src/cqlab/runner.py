"""Scenario execution: evolve the requested tiers, cross-check, report.

A run produces a RunReport holding per-tier expectation series, any
caustic/fisher/circulation diagnostics, and one verdict per requested
cross-check.  Reports serialize to JSON and the series to CSV with fixed
float formatting, so identical scenario files diff identically across
runs of the same build.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CqlabError
from .fields import masked_max_abs
from .fisher import verify_l0_conditions
from .fields import ConfigDensity
from .grid import quadrature
from .hamiltonian import velocity_map
from .invariants import circle_contour, kelvin_trace_qt
from .phase_ensemble import (PhaseDensity, evolve_liouville, expectation,
                             integrate_characteristic, PhaseState)
from .projection import evolve_hj_continuity, evolve_canonical_condition, extract_trajectory
from .quantum import (QT_STATE_CATALOG, evolve_classical_wave, evolve_schrodinger,
                      madelung_decompose, qt_expectations)
from .scenario import (CROSS_CHECKS, Scenario, action_catalog_entry,
                       density_catalog_entry, momentum_catalog_entry)

__all__ = ["RunReport", "run", "write_report"]

SCHEMA_VERSION = 1


@dataclass
class RunReport:
    scenario: dict
    series: dict = field(default_factory=dict)
    caustic: dict | None = None
    fisher: dict | None = None
    circulation: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add_check(self, name: str, measured: float, tolerance: float, passed: bool,
                  detail: str = ""):
        self.checks.append({
            "name": name,
            "source": CROSS_CHECKS[name],
            "measured": measured,
            "tolerance": tolerance,
            "passed": bool(passed),
            "detail": detail,
        })

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "series": self.series,
            "caustic": self.caustic,
            "fisher": self.fisher,
            "circulation": self.circulation,
            "checks": self.checks,
            "verdict": "pass" if self.passed else "fail",
        }


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _build_psi(scenario: Scenario):
    spec = dict(scenario.initial_state["psi"])
    kind = spec.pop("type")
    factory = QT_STATE_CATALOG[kind]
    return factory(scenario.grid, hbar=scenario.numerics.hbar, **spec)


def _run_qt(scenario: Scenario, report: RunReport):
    H = scenario.hamiltonian
    dt = scenario.numerics.dt
    psi = _build_psi(scenario)
    rows = []
    snapshots = {0.0: psi}
    e0 = qt_expectations(H, psi)
    for t in scenario.output_times:
        if t > psi.t:
            psi = evolve_schrodinger(H, psi, t - psi.t, dt=dt)
            snapshots[t] = psi
        e = qt_expectations(H, psi)
        norm = quadrature(psi.density, psi.grid)
        rows.append([psi.t, *e["q"], *e["p"], *e["F"], e["H"], norm])
    dim = scenario.grid.dim
    header = (["t"] + [f"q{k}" for k in range(dim)] + [f"p{k}" for k in range(dim)]
              + [f"F{k}" for k in range(dim)] + ["H", "norm"])
    report.series["QT"] = {"header": header, "rows": rows}

    if "norm_energy" in scenario.cross_checks:
        norm_drift = max(abs(r[-1] - 1.0) for r in rows)
        e_col = len(header) - 2
        e_ref = rows[0][e_col]
        energy_drift = max(abs(r[e_col] - e_ref) for r in rows) / max(abs(e_ref), 1e-300)
        report.add_check("norm_energy", max(norm_drift, energy_drift), 1e-8,
                         norm_drift < 1e-10 and energy_drift < 1e-8,
                         f"norm drift {norm_drift:.3e}, energy drift {energy_drift:.3e}")

    if "ehrenfest" in scenario.cross_checks:
        delta = dt
        worst = 0.0
        base = _build_psi(scenario)
        for t in [tt for tt in scenario.output_times if tt > 0][:3]:
            before = evolve_schrodinger(H, base, t - delta, dt=dt)
            center = evolve_schrodinger(H, before, delta, dt=delta)
            after = evolve_schrodinger(H, center, delta, dt=delta)
            ea, ec, eb = (qt_expectations(H, x) for x in (after, center, before))
            dq = (ea["q"] - eb["q"]) / (2 * delta) - ec["p"] / H.m
            dp = (ea["p"] - eb["p"]) / (2 * delta) - ec["F"]
            worst = max(worst, float(np.max(np.abs(dq))), float(np.max(np.abs(dp))))
        report.add_check("ehrenfest", worst, 1e-5, worst < 1e-5)

    if "kelvin_qt" in scenario.cross_checks:
        psi0 = _build_psi(scenario)
        trace = kelvin_trace_qt(H, psi0, circle_contour((0.0, 0.0), 1.0, 256),
                                scenario.output_times, dt=max(dt, 2e-3),
                                eps_rho=scenario.numerics.eps_rho)
        report.circulation.append({
            "kind": "kelvin_qt",
            "t": list(trace.times),
            "circulation": [None if np.isnan(v) else v for v in trace.values],
            "winding": [None if np.isnan(w) else int(w) for w in trace.windings],
            "flags": list(trace.flags),
            "jumps": trace.winding_jumps(),
        })
        ok = all(f == "" for f in trace.flags)
        report.add_check("kelvin_qt", 0.0 if ok else 1.0, 0.5, ok,
                         "all samples defined with integer winding")
    return snapshots


def _run_cwe(scenario: Scenario, report: RunReport):
    H = scenario.hamiltonian
    dt = scenario.numerics.dt
    psi0 = _build_psi(scenario)
    t_end = scenario.output_times[-1]
    cw = evolve_classical_wave(H, psi0, t_end, dt=dt,
                               eps_rho=scenario.numerics.eps_rho)
    pair = madelung_decompose(cw, eps_rho=scenario.numerics.eps_rho)
    report.series["CWE"] = {
        "header": ["t", "norm"],
        "rows": [[cw.t, quadrature(cw.density, cw.grid)]],
    }
    if "cwe_qt_toggle" in scenario.cross_checks:
        a = evolve_classical_wave(H, psi0, t_end, dt=dt, nonlinear_coefficient=0.0)
        b = evolve_schrodinger(H, psi0, t_end, dt=dt)
        dev = float(np.max(np.abs(a.values - b.values)))
        report.add_check("cwe_qt_toggle", dev, 1e-12, dev <= 1e-12)
    return cw, pair


def _qa_initial_data(scenario: Scenario):
    istate = scenario.initial_state
    dim = scenario.grid.dim
    if "s0" in istate:
        s0, grad_s0, hess_s0 = action_catalog_entry(istate["s0"], dim)
        rho0 = density_catalog_entry(istate["rho0"], dim)
        return ("hj", s0, grad_s0, hess_s0, rho0)
    m0, grad_m0 = momentum_catalog_entry(istate["m0"], dim)
    return ("canonical", m0, grad_m0, None, None)


def _run_qa(scenario: Scenario, report: RunReport):
    H = scenario.hamiltonian
    t_end = scenario.output_times[-1]
    kind, a, b, c, d = _qa_initial_data(scenario)
    if kind == "hj":
        ev = evolve_hj_continuity(H, a, d, t_end, grid=scenario.grid,
                                  numerics=scenario.numerics, grad_S0=b, hess_S0=c)
    else:
        ev = evolve_canonical_condition(H, a, t_end, grid=scenario.grid,
                                        numerics=scenario.numerics, grad_M0=b)
    report.caustic = ev.report.as_dict()
    report.series["QA"] = {
        "header": ["t", "covered_nodes"],
        "rows": [[float(tv), int(m.sum())] for tv, m in zip(ev.times, ev.masks)],
    }
    if "caustic_time" in scenario.cross_checks:
        expected = scenario.raw.get("expected", {}).get("t_star")
        t_star = ev.report.t_star
        if expected is None:
            passed = True
            measured = -1.0 if t_star is None else t_star
            detail = "no expected window declared"
        else:
            lo, hi = expected
            measured = -1.0 if t_star is None else t_star
            passed = t_star is not None and lo <= t_star <= hi
            detail = f"t* in [{lo}, {hi}]"
        report.add_check("caustic_time", measured, 0.0, passed, detail)
    if "pm_qa_trajectories" in scenario.cross_checks:
        t_star = ev.report.t_star
        horizon = 0.9 * t_star if t_star is not None else ev.t
        horizon = min(horizon, ev.t)
        q0 = float(scenario.raw.get("expected", {}).get("trajectory_q0", 1.0))
        traj = extract_trajectory(H, ev, q0, horizon, dt=scenario.numerics.dt)
        if kind == "hj":
            p0 = b(np.array([[q0] * scenario.grid.dim]))[0]
        else:
            p0 = a(np.array([[q0] * scenario.grid.dim]))[0]
        ref = integrate_characteristic(H, PhaseState(traj.q[0], p0), horizon,
                                       dt=scenario.numerics.dt)
        dev = max(float(np.max(np.abs(traj.q[-1] - ref.q))),
                  float(np.max(np.abs(traj.p[-1] - ref.p))))
        report.add_check("pm_qa_trajectories", dev, 1e-6, dev < 1e-6,
                         f"horizon t={horizon:.4g}")
    return ev


def _run_pm(scenario: Scenario, report: RunReport):
    H = scenario.hamiltonian
    pg = scenario.phase_grid
    spec = scenario.initial_state["phase_density"]
    mean = np.asarray(spec["mean"], dtype=float)
    sigma = np.broadcast_to(np.atleast_1d(np.asarray(spec["sigma"], dtype=float)), (2,))
    Q, P = pg.meshgrid()
    vals = np.exp(-((Q - mean[0]) ** 2 / sigma[0] ** 2
                    + (P - mean[1]) ** 2 / sigma[1] ** 2) / 2.0)
    vals /= pg.quadrature(vals)
    rho = PhaseDensity(pg, vals)
    energy_obs = H.value(np.stack([Q.ravel()], axis=-1),
                         np.stack([P.ravel()], axis=-1)).reshape(pg.shape)
    rows = []
    for t in scenario.output_times:
        rho_t = evolve_liouville(H, rho, t, dt=max(scenario.numerics.dt, 1e-2)) \
            if t > 0 else rho
        rows.append([t, expectation(rho_t, Q), expectation(rho_t, P),
                     expectation(rho_t, energy_obs),
                     pg.quadrature(rho_t.values), float(rho_t.values.min())])
    report.series["PM"] = {"header": ["t", "q", "p", "H", "norm", "min_rho"], "rows": rows}
    if "liouville_norm" in scenario.cross_checks:
        dev = max(abs(r[4] - 1.0) for r in rows)
        report.add_check("liouville_norm", dev, 1e-6, dev < 1e-6)


def run(scenario: Scenario, out_dir: str | Path | None = None) -> RunReport:
    """Execute every requested tier, evaluate cross-checks, emit the report."""
    report = RunReport(scenario=scenario.echo())

    if "fisher_identities" in scenario.cross_checks:
        psi = _build_psi(scenario)
        rho = ConfigDensity(psi.grid, psi.density, norm_tol=1e-8)
        B0 = scenario.numerics.hbar**2 / (4.0 * scenario.hamiltonian.m)
        fr = verify_l0_conditions(rho, B0=B0, eps_rho=scenario.numerics.eps_rho)
        report.fisher = fr.as_dict()
        worst = max(fr.l0_identity_residual, *fr.constraint_residual)
        report.add_check("fisher_identities", worst, 1e-8, worst < 1e-8)

    qa_ev = None
    if "QA" in scenario.tiers:
        qa_ev = _run_qa(scenario, report)
    if "QT" in scenario.tiers:
        _run_qt(scenario, report)
    if "CWE" in scenario.tiers:
        cw, pair = _run_cwe(scenario, report)
        if "qa_cwe_fields" in scenario.cross_checks and qa_ev is not None:
            # compare on the support where both densities are above the
            # splitting-noise level; below ~1e-8 of the peak the nonlinear
            # solver's phase is noise and says nothing about the fields
            floor = max(scenario.numerics.eps_rho, 1e-8)
            rho_cw = pair.density.values
            rho_qa = qa_ev.density[-1]
            both = (qa_ev.masks[-1] & pair.mask
                    & (rho_cw >= floor * rho_cw.max())
                    & (rho_qa >= floor * np.nanmax(rho_qa)))
            dev_rho = masked_max_abs(np.where(both, rho_cw - rho_qa, 0.0), both)
            ds = pair.action.values - qa_ev.action[-1]
            ds = ds - np.median(ds[both])
            dev_s = masked_max_abs(np.where(both, ds, 0.0), both)
            dev = max(dev_rho, dev_s)
            report.add_check("qa_cwe_fields", dev, 5e-3, dev < 5e-3,
                             f"rho {dev_rho:.3e}, S {dev_s:.3e}")
    if "PM" in scenario.tiers:
        _run_pm(scenario, report)

    if out_dir is not None:
        write_report(report, out_dir, scenario.name)
    return report


def write_report(report: RunReport, out_dir: str | Path, name: str):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(report.as_dict(), indent=2, sort_keys=True, default=_json_default)
    (out / f"{name}_report.json").write_text(payload + "\n")
    for tier, series in report.series.items():
        _write_csv(out / f"{name}_{tier.lower()}.csv", series["header"], series["rows"])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
