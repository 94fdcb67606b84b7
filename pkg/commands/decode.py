"""aad decode: decodificação de atenção com validação cruzada aninhada."""

import logging

from commands._common import add_dataset_arguments, algorithms_arg, experiment_config
from handlers.experiment import run_experiment
from utils.config import ALGORITHMS

logger = logging.getLogger(__name__)


def run(args) -> int:
    lengths = tuple(args.lengths) if args.lengths else None
    config = experiment_config(args, algorithms=algorithms_arg(args.algo), segment_lengths=lengths,
                               trf=True if args.trf else None)
    report = run_experiment(config)
    for row in report.summary.get("accuracy", []):
        logger.info(f"{row['algorithm']}/{row['feature']} {row['length']:g} s: "
                    f"{100 * row['accuracy']:.1f}% (acaso {100 * row['chance']:.1f}%)")
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("decode", help="Decodifica a atenção (linear, cnn, cca)")
    add_dataset_arguments(parser)
    parser.add_argument("--algo", action="append", choices=ALGORITHMS, help="Algoritmo (repetível)")
    parser.add_argument("--lengths", type=float, nargs="+", help="Comprimentos de segmento (s)")
    parser.add_argument("--trf", action="store_true", help="Inclui a análise de TRFs")
    parser.set_defaults(handler=run)
