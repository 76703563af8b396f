"""Command line: ``python -m aghetnet {run,sweep-cre,optimize,pathloss-cdf} [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness as hn
from .kpi import EvaluationError
from .optimizer import BudgetExceeded

COMMANDS = ("run", "sweep-cre", "optimize", "pathloss-cdf")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aghetnet", description="Air-ground HetNet ICIC experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--preset", choices=("full", "desk"), default="full",
                   help="defaults the config file is layered on")
    p.add_argument("--regime", choices=hn.REGIMES)
    p.add_argument("--optimizer", choices=hn.OPTIMIZERS)
    p.add_argument("--uabs-height", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> hn.ExperimentConfig:
    base = hn.desk_scale() if args.preset == "desk" else hn.full_scale()
    cfg = hn.load_config(args.config, base) if args.config else base
    over = {}
    if args.regime:
        over["regimes"] = (args.regime,)
    if args.optimizer:
        over["optimizers"] = (args.optimizer,)
    if args.uabs_height is not None:
        over["uabs_heights"] = (args.uabs_height,)
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.command == "sweep-cre":
        over["optimizers"] = ("hex-brute",)
    elif args.command == "optimize" and not args.optimizer:
        over["optimizers"] = ("ga", "ehsga")
    return cfg.replace(**over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = args.out or sys.stdout
    try:
        cfg = config_from_args(args)
        if args.command == "pathloss-cdf":
            hn.write_pathloss_cdf(hn.pathloss_samples(cfg), out)
        else:
            hn.write_report(hn.run_experiment(cfg), out)
    except (hn.ConfigError, EvaluationError, BudgetExceeded, OSError) as exc:
        print(f"aghetnet: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
