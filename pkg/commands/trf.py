"""aad trf: TRFs por participante, TRFs nulos e teste de clusters."""

import logging
from dataclasses import replace

from commands._common import add_dataset_arguments, experiment_config
from handlers.experiment import run_experiment

logger = logging.getLogger(__name__)


def run(args) -> int:
    config = experiment_config(args, n_shifts=args.shifts, n_perm=args.perm)
    report = run_experiment(replace(config, trf=True), decode=False)
    for label, test in sorted(report.summary.get("trf_tests", {}).items()):
        logger.info(f"TRF {label}: p={test['p']:.4f}{' *' if test['significant'] else ''}")
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("trf", help="Análise de TRFs (modelos forward)")
    add_dataset_arguments(parser)
    parser.add_argument("--shifts", type=int, help="Número de desalinhamentos nulos")
    parser.add_argument("--perm", type=int, help="Número de permutações de sinal")
    parser.set_defaults(handler=run)
