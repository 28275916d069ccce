"""Command-line entry point.

Subcommands
-----------
simulate
    ``obpclab simulate scenario.toml -o outdir`` — run one closed-loop
    scenario file and write its trajectory CSV and summary.
reproduce
    ``obpclab reproduce --example {1|2} --scheme {obpc|mpc} -o outdir`` —
    re-run a canonical benchmark and emit CSV plus gnuplot-ready data.
stability
    ``obpclab stability --example {1|2} -o report.txt`` — write the
    stability certificate report for one benchmark example.
sweep
    ``obpclab sweep sweep.toml -o outdir`` — run an initial-condition
    sweep and aggregate the practical-stability certificates.

The global ``--seed`` flag overrides the scenario's random seed.  Exit
codes: 0 success, 2 configuration error, 3 divergence, 4 optimizer
failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    EXIT_CONFIG,
    cmd_reproduce,
    cmd_simulate,
    cmd_stability,
    cmd_sweep,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obpclab",
        description="Observer-based predictive control laboratory.",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("scenario", help="path to a scenario TOML file")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("reproduce", help="re-run a canonical benchmark")
    p.add_argument("--example", type=int, choices=(1, 2), required=True)
    p.add_argument("--scheme", choices=("obpc", "mpc"), required=True)
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("stability", help="emit stability certificates")
    p.add_argument("--example", type=int, choices=(1, 2), required=True)
    p.add_argument("-o", "--output", required=True, help="output file")

    p = sub.add_parser("sweep", help="run an initial-condition sweep")
    p.add_argument("sweep", help="path to a sweep TOML file")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel worker count (default 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.output, seed=args.seed)
    if args.command == "reproduce":
        return cmd_reproduce(args.example, args.scheme, args.output,
                             seed=args.seed)
    if args.command == "stability":
        return cmd_stability(args.example, args.output)
    if args.command == "sweep":
        return cmd_sweep(args.sweep, args.output, seed=args.seed,
                         workers=args.workers)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
