"""Command line entry point: ``wavecheck study | cfl | run``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, ContractViolation, ReliabilityViolation, SolverError
from .harness import StudyConfig, emit_report, run_cfl_scenario, run_study

EXIT_OK, EXIT_RELIABILITY, EXIT_CONFIG = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="wavecheck", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_ in (("study", "run a refinement study"), ("cfl", "run the CFL-violation scenario")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="JSON study configuration")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--quad-points", type=int, help="override the Gauss points per panel")
        s.add_argument("--no-plot", action="store_true", help="skip the SVG figure")

    r = sub.add_parser("run", help="run a single case and print its row")
    r.add_argument("--preset", type=int, choices=(1, 2, 3), required=True)
    r.add_argument("--scheme", choices=("leapfrog", "cosine"), default="leapfrog")
    r.add_argument("--q1", type=float, default=0.0)
    r.add_argument("--formulation", type=int, choices=(1, 2), default=1)
    r.add_argument("--h", type=float, required=True)
    r.add_argument("--k", type=float, required=True)
    r.add_argument("--T", type=float)
    r.add_argument("--operator", choices=("spectral", "fd1d", "fd2d"), default="spectral")
    r.add_argument("--quad-points", type=int)
    r.add_argument("--out", help="also write a report to this directory")
    return p


def _report_violations(study):
    bad = study.violations()
    for row in bad:
        print(
            f"reliability violation at level {row.level}: sup_eR={row.sup_eR:.6e} > eta1={row.eta1:.6e}",
            file=sys.stderr,
        )
    return bool(bad)


def _summary(study):
    for r in study.rows:
        print(
            f"level {r.level}: k={r.k:.6e} N={r.N} stable={int(r.stable)} sup_eR={r.sup_eR:.6e} "
            f"sup_eL={r.sup_eL:.6e} eta1={r.eta1:.6e} iei={r.iei:.4f} eoc_eta1={r.eoc_eta1:.3f}"
        )


def _load(args):
    cfg = StudyConfig.load(args.config)
    if args.quad_points is not None:
        cfg.quad_points = args.quad_points
        cfg.validate()
    return cfg


def _cmd_study(args):
    study = run_study(_load(args))
    emit_report(study, args.out, plot=not args.no_plot)
    _summary(study)
    return EXIT_RELIABILITY if _report_violations(study) else EXIT_OK


def _cmd_cfl(args):
    study, verdicts = run_cfl_scenario(_load(args))
    emit_report(study, args.out, verdicts=verdicts, plot=not args.no_plot)
    _summary(study)
    for row, v in zip(study.rows, verdicts):
        print(
            f"cfl level {row.level}: k*sqrt(lmax)={row.cfl_number:.4f} growth(eL)={v.growth_error:.3e} "
            f"growth(eta1)={v.growth_eta:.3e} iei_spread={v.iei_spread:.3f} passed={v.passed}"
        )
    if not all(v.reliable_eR and v.reliable_eL for v in verdicts):
        print("estimator fell below the error during the unstable run", file=sys.stderr)
        return EXIT_RELIABILITY
    return EXIT_OK


def _cmd_run(args):
    data = {
        "name": f"run_p{args.preset}",
        "preset": args.preset,
        "operator": {"kind": args.operator},
        "scheme": {"family": args.scheme, "q1": args.q1, "formulation": args.formulation},
        "h": [args.h],
        "time_step": {"rule": "explicit", "k": [args.k]},
        "T": args.T,
    }
    if args.quad_points is not None:
        data["quad_points"] = args.quad_points
    study = run_study(StudyConfig.from_dict(data))
    row = study.rows[0]
    print(json.dumps({c: getattr(row, c) for c in ("h", "k", "N", "stable", "sup_eR", "sup_eL", "eta1", "iei",
                                                   "energy_T", "cfl_number", "wall_ms")}))
    if args.out:
        emit_report(study, args.out)
    return EXIT_RELIABILITY if _report_violations(study) else EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {"study": _cmd_study, "cfl": _cmd_cfl, "run": _cmd_run}[args.command]
    try:
        return handler(args)
    except ReliabilityViolation as exc:
        print(f"reliability violation: {exc}", file=sys.stderr)
        return EXIT_RELIABILITY
    except (ConfigError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
