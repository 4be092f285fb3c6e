"""Command-line interface.

Subcommands: ``simulate``, ``gauge-check``, ``convergence``,
``mixture-demo``, ``sweep``. Every subcommand takes a scenario config file
and an output directory; all file paths come from the config or flags and
nothing touches the network. Worker count for sweeps comes from
``NLGAUGE_WORKERS`` or ``--workers``.

Exit codes: 0 success, 2 config error, 3 numerical abort,
4 threshold failure (gauge-check with ``--fail-above``).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import NumericalAbort, convergence, gauge_check, mixture_demo, simulate, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlgauge",
        description="Pseudo-spectral simulator and verification harness for "
                    "nonlinear gauge transformations in quantum mechanics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario config file")
        p.add_argument("--out", default="out", help="output directory (default: out)")

    p = sub.add_parser("simulate", help="run one scenario and write diagnostics")
    common(p)

    p = sub.add_parser("gauge-check", help="gauge-equivalence oracle check")
    common(p)
    p.add_argument("--levels", type=int, default=3,
                   help="number of dt halvings for the convergence slope")
    p.add_argument("--fail-above", type=float, default=None,
                   help="exit 4 if the deviation exceeds this threshold")

    p = sub.add_parser("convergence", help="dt-refinement self-convergence study")
    common(p)
    p.add_argument("--levels", type=int, default=3, help="refinement levels (>= 3)")

    p = sub.add_parser("mixture-demo", help="decomposition divergence demonstration")
    common(p)

    p = sub.add_parser("sweep", help="parameter sweep over a config key")
    common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="worker pool size (default: NLGAUGE_WORKERS or 2)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            report = simulate(cfg, args.out)
            print(f"simulate: final norm {report.metrics['final_norm']:.12f}, "
                  f"norm drift {report.metrics['norm_drift']:.3e}")
        elif args.command == "gauge-check":
            report = gauge_check(cfg, args.out, levels=args.levels)
            dev = report.metrics["deviation"]
            slopes = report.metrics["convergence_slopes"]
            print(f"gauge-check: deviation {dev:.3e}, slopes "
                  + ", ".join(f"{s:.2f}" for s in slopes))
            if args.fail_above is not None and dev > args.fail_above:
                print(f"gauge-check: deviation {dev:.3e} exceeds threshold "
                      f"{args.fail_above:.3e}", file=sys.stderr)
                return EXIT_THRESHOLD
        elif args.command == "convergence":
            report = convergence(cfg, args.out, levels=args.levels)
            orders = report.metrics["observed_orders"]
            print("convergence: observed orders "
                  + ", ".join(f"{o:.2f}" for o in orders))
        elif args.command == "mixture-demo":
            report = mixture_demo(cfg, args.out)
            print(f"mixture-demo: divergence {report.metrics['divergence']:.3e}")
        elif args.command == "sweep":
            report = sweep(cfg, args.out, workers=args.workers)
            print(f"sweep: {report.metrics['runs']} runs, "
                  f"{report.metrics['failures']} failures")
        else:  # pragma: no cover
            raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
