"""Command line interface.

Subcommands ``oracle``, ``estimate``, ``replicate``, ``nested``, ``galaxy``,
``reweight`` and ``csweep`` share the flags ``--config``, ``--seed``,
``--out``, ``--replicates``, ``--full``, ``--workers``, ``--set`` and
``--log-level``. Failures print one ``error=<Class> message=...`` line to
stderr and exit with the error's code: 2 config, 3 sampler stall,
4 connectivity, 5 non-convergence.
"""

import argparse
import json
import sys
from typing import List, Optional

from ..errors import ZsightError
from ..logger import logger
from ..models.BananaModel import BananaModel
from ..models.quadrature import quadrature_evidence
from ..pydantics.Experiment import ExperimentConfig
from .Runner import Runner
from .studies import c_sweep, galaxy_study, nested_study, sample_size_study

COMMANDS = ("oracle", "estimate", "replicate", "nested", "galaxy", "reweight", "csweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsight", description="Marginal likelihoods by recursive pathways.")

    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="YAML experiment file")
    parser.add_argument("--seed", type=int, default=None, help="base seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--replicates", type=int, default=None, help="replicates per setting")
    parser.add_argument("--full", action="store_true", help="full-scale sample sizes")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for replicates")
    parser.add_argument("--pool", default=None, help="pool bundle for reweight")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config entry, repeatable",
    )
    parser.add_argument("--log-level", default=None, choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = list(args.overrides)

    for key, value in (("seed", args.seed), ("out", args.out), ("replicates", args.replicates), ("study.workers", args.workers)):
        if value is not None:
            overrides.append(f"{key}={value}")

    if args.full:
        overrides.append("full=true")

    return ExperimentConfig.load(args.config, overrides)


def print_rows(summary) -> None:
    for row in summary.rows:
        print(f"{row.setting} {row.method}: mean={row.mean_log_z:.4f} se_replicate={row.se_replicate:.4f}")


def run(args: argparse.Namespace) -> None:
    if args.log_level is not None:
        logger.disabled = False
        logger.setLevel(args.log_level)

    if args.command == "oracle":
        log_z = quadrature_evidence(BananaModel())

        print(json.dumps(dict(model="banana", log_z=log_z)))

        return

    config = load_config(args)

    if args.command == "estimate":
        runner = Runner(config)
        report = runner.run()

        print(str(report))
        print(f"artefacts in {runner.directory}")

    elif args.command == "replicate":
        summary = sample_size_study(config)

        print_rows(summary)

    elif args.command == "csweep":
        summary = c_sweep(config)

        print_rows(summary)

    elif args.command == "nested":
        summary = nested_study(config)

        print_rows(summary)

    elif args.command == "galaxy":
        posterior = galaxy_study(config)

        for row in posterior.rows:
            print(f"k={row.k} log_z={row.log_z:.3f} posterior={row.posterior:.3f} interval={row.interval}")

        print(f"log_z_total={posterior.log_z_total:.3f} mode={posterior.mode}")

    elif args.command == "reweight":
        result = Runner(config).reweight(args.pool)

        print(json.dumps(result._asdict()))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        run(args)
    except ZsightError as error:
        logger.error(f"{type(error).__name__}: {error}")

        print(f"error={type(error).__name__} message={str(error)}", file=sys.stderr)

        return error.exit_code

    return 0
