"""Batch command-line interface.

Exit codes: 0 when every check is PASS or VACUOUS, 1 when any check FAILs,
2 for input errors (reported as one JSON object on stderr). Output is
deterministic for a fixed --seed.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import hj, reduction
from .dynamics import symplectic_residual
from .errors import MagnomechError, ScenarioError
from .geometry import (
    PhasePoint,
    magnetic_match_residual,
    two_form_closedness_residual,
)
from .integrate import integrate
from .nonholonomic import compatibility_report, project_to_constraint
from .sampling import (
    config_samples,
    newton_preimage,
    phase_samples,
    surface_phase_samples,
)
from .scenarios import (
    CheckReport,
    construct_induced_scenario,
    load_scenario,
    build_system,
    reports_to_json,
    serialize_scenario,
    timed_check,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magnomech",
        description="Magnetic and constrained Hamiltonian dynamics checks")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a scenario trajectory")
    sim.add_argument("scenario")
    sim.add_argument("--field", choices=["magnetic", "distributional"],
                     default="magnetic")
    sim.add_argument("--t-end", type=float, required=True)
    sim.add_argument("--dt", type=float, required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--no-project", action="store_true",
                     help="disable per-step constraint projection")

    chk = sub.add_parser("check", help="run verification checks")
    chk.add_argument("kind", choices=["hj1", "hj2", "geometry", "all"])
    chk.add_argument("target", help="scenario file, or a directory for 'all'")
    chk.add_argument("--reduced", action="store_true",
                     help="run the symmetry-reduced variant")
    chk.add_argument("--samples", type=int, default=50)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--report", help="write a JSON report to this path")

    con = sub.add_parser("construct-b",
                         help="emit a scenario with the section-induced two-form")
    con.add_argument("scenario")
    con.add_argument("--out", required=True)
    return parser


def _input_error(code, message, field=None):
    payload = {"code": code, "message": message}
    if field:
        payload["field"] = field
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return EXIT_INPUT


def _config_points(system, count):
    return config_samples(system.sample_box, count)


def _phase_points(system, count, seed):
    rng = np.random.default_rng(seed)
    if system.constrained:
        return surface_phase_samples(system.dist, system.ham,
                                     system.sample_box, count, rng)
    return phase_samples(system.sample_box, count, rng)


def _type2_samples(system, count, seed):
    """Sample points for the Type II checks.

    Half are preimages of generic points (surface points when constrained),
    half are preimages of section points so both status branches appear.
    """
    targets = _phase_points(system, count - count // 2, seed)
    if system.gamma is not None:
        for q in _config_points(system, count // 2):
            targets.append(PhasePoint(q, system.gamma.value(q)))
    return [newton_preimage(system.epsilon, w) for w in targets]


def check_geometry(system, count, seed):
    """Closedness, compatibility, dimensions and map diagnostics."""
    with timed_check() as clock:
        data = {}
        verdict = "PASS"
        tol = system.tolerances
        qs = _config_points(system, count)
        closedness = max(two_form_closedness_residual(system.mag.b_field, q)
                         for q in qs)
        data["b_closedness_residual"] = closedness
        if closedness > 1e-6:
            verdict = "FAIL"
        if system.constrained:
            zs = _phase_points(system, count, seed)
            reports = [compatibility_report(system.dist, system.ham, system.mag,
                                            z, sigma_tol=tol.get("compat_sigma"))
                       for z in zs]
            dims = sorted({(r.dim_f, r.dim_tm, r.dim_k) for r in reports})
            data["dims"] = [list(d) for d in dims]
            data["dims_constant"] = len(dims) == 1
            data["sigma_min"] = min(r.sigma_min for r in reports)
            data["compatibility_passed"] = all(r.passed for r in reports)
            if not data["compatibility_passed"] or not data["dims_constant"]:
                verdict = "FAIL"
        if system.gamma is not None:
            residual = max(
                magnetic_match_residual(system.gamma, system.mag.b_field, q,
                                        basis=system.dist.basis(q))
                for q in qs)
            data["gamma_match_residual"] = residual
        if system.epsilon is not None:
            zs = _phase_points(system, min(count, 10), seed)
            data["symplectic_residual"] = max(
                symplectic_residual(system.epsilon, system.mag, z) for z in zs)
        if system.symmetry is not None and system.constrained:
            zs = _phase_points(system, min(count, 10), seed)
            related_verdict, related_data = reduction.relatedness_check(
                system.symmetry, system.dist, system.ham, system.mag, zs,
                tolerances=tol)
            data.update(related_data)
            data["relatedness_verdict"] = related_verdict
            if related_verdict == "FAIL":
                verdict = "FAIL"
    return CheckReport(system.name, "geometry", verdict, data, clock.elapsed)


def _report_from_hj(system, check_name, hj_report, elapsed):
    data = hj_report.as_dict()
    data.pop("check", None)
    return CheckReport(system.name, check_name, hj_report.verdict, data, elapsed)


def check_hj1(system, count, seed, reduced=False):
    if system.gamma is None:
        raise ScenarioError("missing_field", "check hj1 needs gamma", "gamma")
    qs = _config_points(system, count)
    with timed_check() as clock:
        if reduced:
            if system.symmetry is None:
                raise ScenarioError("missing_field",
                                    "check hj1 --reduced needs symmetry",
                                    "symmetry")
            report = reduction.type1_reduced(
                system.gamma, system.symmetry, system.dist, system.ham,
                system.mag, qs, tolerances=system.tolerances)
        elif system.constrained:
            report = hj.type1_constrained(system.gamma, system.dist, system.ham,
                                          system.mag, qs,
                                          tolerances=system.tolerances)
        else:
            report = hj.type1_magnetic(system.gamma, system.ham, system.mag, qs,
                                       tolerances=system.tolerances)
    name = "hj1-reduced" if reduced else ("hj1-distributional" if system.constrained
                                          else "hj1-magnetic")
    return _report_from_hj(system, name, report, clock.elapsed)


def check_hj2(system, count, seed, reduced=False):
    if system.gamma is None or system.epsilon is None:
        raise ScenarioError("missing_field", "check hj2 needs gamma and epsilon")
    zs = _type2_samples(system, count, seed)
    with timed_check() as clock:
        if reduced:
            if system.symmetry is None:
                raise ScenarioError("missing_field",
                                    "check hj2 --reduced needs symmetry",
                                    "symmetry")
            report = reduction.type2_reduced(
                system.gamma, system.epsilon, system.symmetry, system.dist,
                system.ham, system.mag, zs, tolerances=system.tolerances)
        elif system.constrained:
            report = hj.type2_constrained(system.gamma, system.epsilon,
                                          system.dist, system.ham, system.mag,
                                          zs, tolerances=system.tolerances)
        else:
            report = hj.type2_magnetic(system.gamma, system.epsilon, system.ham,
                                       system.mag, zs,
                                       tolerances=system.tolerances)
    name = "hj2-reduced" if reduced else ("hj2-distributional" if system.constrained
                                          else "hj2-magnetic")
    return _report_from_hj(system, name, report, clock.elapsed)


def checks_for_system(system, count, seed):
    """Every check applicable to one scenario, in a stable order."""
    reports = [check_geometry(system, count, seed)]
    if system.gamma is not None:
        reports.append(check_hj1(system, count, seed))
        if system.symmetry is not None:
            reports.append(check_hj1(system, count, seed, reduced=True))
    if system.gamma is not None and system.epsilon is not None:
        reports.append(check_hj2(system, count, seed))
        if system.symmetry is not None:
            reports.append(check_hj2(system, count, seed, reduced=True))
    return reports


def _print_reports(reports):
    for report in reports:
        extras = []
        for key in ("equation_residual", "hypothesis_residual",
                    "b_closedness_residual", "sigma_min"):
            if key in report.data and report.data[key] is not None:
                extras.append(f"{key}={report.data[key]:.3e}")
        print(f"{report.table_row()} {' '.join(extras)}".rstrip())


def run_check(args):
    samples = args.samples
    if args.kind == "all":
        directory = Path(args.target)
        if not directory.is_dir():
            raise ScenarioError("parse", f"{args.target} is not a directory")
        paths = sorted(directory.glob("*.json"))
        if not paths:
            raise ScenarioError("parse", f"no scenario files in {args.target}")
        reports = []
        for path in paths:
            system = build_system(load_scenario(path))
            reports.extend(checks_for_system(system, samples, args.seed))
    else:
        system = build_system(load_scenario(args.target))
        if args.kind == "geometry":
            reports = [check_geometry(system, samples, args.seed)]
        elif args.kind == "hj1":
            reports = [check_hj1(system, samples, args.seed, reduced=args.reduced)]
        else:
            reports = [check_hj2(system, samples, args.seed, reduced=args.reduced)]
    _print_reports(reports)
    if args.report:
        Path(args.report).write_text(reports_to_json(reports))
    failed = sum(1 for r in reports if r.verdict == "FAIL")
    print(f"{len(reports)} checks: "
          f"{sum(1 for r in reports if r.verdict == 'PASS')} pass, "
          f"{failed} fail, "
          f"{sum(1 for r in reports if r.verdict == 'VACUOUS')} vacuous")
    return EXIT_FAIL if failed else EXIT_OK


def run_simulate(args):
    system = build_system(load_scenario(args.scenario))
    if system.initial_state is None:
        raise ScenarioError("initial_state",
                            "scenario has no initial_state to integrate from")
    z0 = system.initial_state
    if args.field == "distributional" and system.constrained:
        z0 = project_to_constraint(system.dist, system.ham, z0)
    trajectory = integrate(system.ham, system.mag, z0, args.t_end, args.dt,
                           dist=system.dist, kind=args.field,
                           project=not args.no_project)
    trajectory.write_csv(args.out)
    print(f"wrote {len(trajectory.times)} states to {args.out}; "
          f"|dH|={trajectory.energy_drift():.3e} "
          f"max_drift={float(np.max(trajectory.drifts)):.3e}"
          + (" ABORTED" if trajectory.aborted else ""))
    return EXIT_FAIL if trajectory.aborted else EXIT_OK


def run_construct(args):
    spec = load_scenario(args.scenario)
    new_spec, _system = construct_induced_scenario(spec)
    Path(args.out).write_text(serialize_scenario(new_spec))
    print(f"wrote {new_spec.name} to {args.out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching the input-error contract
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            return run_simulate(args)
        if args.command == "check":
            return run_check(args)
        return run_construct(args)
    except ScenarioError as err:
        return _input_error(err.code, str(err), getattr(err, "field", None))
    except FileNotFoundError as err:
        return _input_error("missing_file", str(err))
    except MagnomechError as err:
        return _input_error(type(err).__name__, str(err))


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
