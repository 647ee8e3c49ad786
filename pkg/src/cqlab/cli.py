"""Command-line entry point.

    cqlab run <scenario.json> [--out DIR]   execute a scenario, write report
    cqlab list-scenarios                    show the bundled scenario catalog
    cqlab clebsch-table --n-max K           potential-count table as CSV
    cqlab verify [--list] [--eps-jac X]     run the acceptance suite

Exit codes: 0 all checks pass, 1 a check failed, 2 execution error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import CqlabError


def _cmd_run(args) -> int:
    from .runner import run
    from .scenario import load_scenario

    scenario = load_scenario(args.scenario)
    report = run(scenario, out_dir=args.out)
    for check in report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']:<20s} measured {check['measured']:.3e} "
              f"tol {check['tolerance']:.1e}  ({check['source']})")
    if report.caustic is not None:
        print(f"caustic: t* = {report.caustic['t_star']}, "
              f"min |det J| = {report.caustic['min_jacobian']:.3e}")
    print(f"verdict: {'pass' if report.passed else 'fail'}")
    return 0 if report.passed else 1


def _cmd_list_scenarios(args) -> int:
    from .scenario import bundled_scenarios

    for name, data in bundled_scenarios().items():
        tiers = ",".join(data.get("tiers", ["QT"]))
        print(f"{name:<24s} [{tiers:<12s}] {data.get('description', '')}")
    return 0


def _cmd_clebsch_table(args) -> int:
    from .clebsch import enumerate_class_solutions, variable_count

    print("N,k,m,potentials,variables,regular,maximal_redundancy")
    for N in range(1, args.n_max + 1):
        for sol in enumerate_class_solutions(N, include_maximal=True):
            print(f"{N},{sol.k},{sol.m},{sol.potential_count},{variable_count(sol)},"
                  f"{int(sol.regular)},{int(sol.maximal_redundancy)}")
    return 0


def _cmd_verify(args) -> int:
    from .acceptance import list_criteria, run_all

    if args.list:
        for cid, desc in list_criteria():
            print(f"{cid:<24s} {desc}")
        return 0
    ctx = {}
    if args.eps_jac is not None:
        ctx["eps_jac"] = args.eps_jac
    results = run_all(ctx)
    print(f"{'criterion':<24s} {'measured':>12s} {'tolerance':>10s} verdict")
    failed = 0
    for r in results:
        verdict = "pass" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{r.cid:<24s} {r.measured:>12.3e} {r.tolerance:>10.1e} {verdict:<5s} "
              f"({r.seconds:.1f}s) {r.detail}")
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cqlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="path to a scenario JSON file")
    p_run.add_argument("--out", default=None, help="directory for report JSON and CSV series")
    p_run.set_defaults(fn=_cmd_run)

    p_list = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_list.set_defaults(fn=_cmd_list_scenarios)

    p_cleb = sub.add_parser("clebsch-table", help="print the potential-count table as CSV")
    p_cleb.add_argument("--n-max", type=int, default=5)
    p_cleb.set_defaults(fn=_cmd_clebsch_table)

    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    p_ver.add_argument("--list", action="store_true", help="list criteria without running")
    p_ver.add_argument("--eps-jac", type=float, default=None,
                       help="override the caustic threshold (diagnostic)")
    p_ver.set_defaults(fn=_cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CqlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
