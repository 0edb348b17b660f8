"""Command-line entry point.

Exit codes: 0 success, 1 a regime (or self-test) failed, 2 configuration error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, FdtClosureError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(prog="fdtclosure", description=(
        "Calibrate and evaluate response-operator closures for the two-scale Lorenz 96 model."))
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--profile", choices=["paper", "desk"])
        sp.add_argument("--out", help="output root directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")

    for name, hlp in (("calibrate", "run the full model and compute response operators"),
                      ("run", "run the whole pipeline for one regime")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--regime", help="coupling constants a,b,c,d")
        sp.add_argument("--force", action="store_true", help="ignore cached stages")
    sp = sub.add_parser("suite", help="run several regimes and write a summary table")
    common(sp)
    sp.add_argument("--regime", action="append",
                    help="a,b,c,d (repeatable); default: the studied regimes, or 'ci'")
    sp.add_argument("--jobs", type=int, default=1)
    sp = sub.add_parser("report", help="print the summary table of a finished suite")
    sp.add_argument("--out", default="runs")
    sp = sub.add_parser("selftest", help="quick numerical self-checks")
    sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config(args, regime=None):
    from .harness import ExperimentConfig

    overrides = {}
    if args.out:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if regime:
        overrides["regime"] = regime
    return ExperimentConfig.from_file(args.config, args.profile, overrides)


def _cmd_calibrate(args):
    from .harness import calibrate_regime

    cfg = _config(args, args.regime)
    *_, cal, runtimes = calibrate_regime(cfg, force=args.force)
    print(f"calibration written to {cfg.out_dir / 'calibration.fdtc'}")
    print(json.dumps({"runtimes": runtimes, "operators": cal.meta.get("operators", {})},
                     indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_run(args):
    from .harness import format_summary, run_regime, write_summary

    cfg = _config(args, args.regime)
    report = run_regime(cfg, force=args.force)
    summary = write_summary({cfg.label: report.to_dict()}, {}, cfg.out_dir)
    print(format_summary(summary))
    return EXIT_OK


def _cmd_suite(args):
    from .harness import CI_REGIMES, STUDIED_REGIMES, format_summary, parse_regime, run_suite
    from .harness import suite_configs

    base = _config(args)
    if args.regime == ["ci"]:
        regimes = CI_REGIMES
    elif args.regime:
        regimes = [parse_regime(r) for r in args.regime]
    elif base.data["regimes"] is not None:
        regimes = [tuple(r) for r in base.data["regimes"]]
    else:
        regimes = STUDIED_REGIMES
    configs = suite_configs(base, regimes)
    reports, failures = run_suite(configs, jobs=max(1, args.jobs), summary_dir=base.data["out"])
    summary = json.loads((Path(base.data["out"]) / "summary.json").read_text())
    print(format_summary(summary))
    for lab, err in failures.items():
        print(f"regime {lab} failed in stage {err['stage']}: {err['error']}", file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def _cmd_report(args):
    from .harness import format_summary

    path = Path(args.out) / "summary.json"
    if not path.exists():
        raise ConfigError(f"no summary at {path}; run a suite first")
    summary = json.loads(path.read_text())
    print(format_summary(summary))
    return EXIT_FAIL if any(e["status"] != "ok" for e in summary["regimes"]) else EXIT_OK


def _cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(verbose=args.verbose)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"calibrate": _cmd_calibrate, "run": _cmd_run, "suite": _cmd_suite,
            "report": _cmd_report, "selftest": _cmd_selftest}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FdtClosureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
