"""Command-line front end: run experiments, condense plot data, verify claims.

    optbandits run --config cfg.yaml --out results/
    optbandits run --experiment counterexample --out results/
    optbandits plot --out results/ --svg
    optbandits verify [--check NAME] [--paper-scale]

``OPTBANDITS_THREADS`` caps how many (agent, seed) tasks run in parallel.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    default_config,
    emit_plots,
    run_experiment,
    write_outputs,
)
from .verify import CHECKS, run_suite


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="optbandits",
        description="Optimistic-sampling bandit and saddle-point experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write its outputs")
    run_p.add_argument("--config", help="YAML experiment configuration")
    run_p.add_argument("--experiment", choices=EXPERIMENT_KINDS,
                       help="named preset instead of a config file")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--seed-offset", type=int, default=0,
                       help="shift every configured seed by this amount")
    run_p.add_argument("--paper-scale", action="store_true",
                       help="full 50x50 / 50x25 problem sizes")

    plot_p = sub.add_parser("plot", help="condense summaries into plot-data files")
    plot_p.add_argument("--out", default="results", help="directory holding summary files")
    plot_p.add_argument("--svg", action="store_true", help="also write SVG line plots")

    ver_p = sub.add_parser("verify", help="run the acceptance checks")
    ver_p.add_argument("--check", action="append", choices=sorted(CHECKS),
                       help="run only this named check (repeatable)")
    ver_p.add_argument("--paper-scale", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "run":
        if bool(args.config) == bool(args.experiment):
            print("specify exactly one of --config or --experiment", file=sys.stderr)
            return 2
        if args.config:
            cfg = ExperimentConfig.from_yaml(args.config)
        else:
            cfg = default_config(args.experiment, paper_scale=args.paper_scale)
        if args.seed_offset:
            cfg = replace(cfg, seeds=tuple(s + args.seed_offset for s in cfg.seeds))
        result = run_experiment(cfg)
        write_outputs(result, args.out)
        print(f"wrote {cfg.name} outputs to {args.out}")
        flagged = sum(
            tr.solver_flags.sum() for tr in result.transcripts.values()
            if tr.solver_flags is not None
        )
        if flagged:
            print(f"note: {flagged} rounds carried solver non-convergence flags")
        return 0

    if args.command == "plot":
        written = emit_plots(args.out, svg=args.svg)
        for path in written:
            print(f"wrote {path}")
        return 0

    if args.command == "verify":
        _, all_passed = run_suite(args.check, paper_scale=args.paper_scale)
        return 0 if all_passed else 1

    return 2


if __name__ == "__main__":
    sys.exit(main())
