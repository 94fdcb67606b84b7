"""aad report: tabelas e figuras de um diretório de resultados."""

import logging

from views.report import render_report

logger = logging.getLogger(__name__)


def run(args) -> int:
    print(render_report(args.results))
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("report", help="Gera o relatório (texto + figuras)")
    parser.add_argument("results", help="Diretório de resultados")
    parser.set_defaults(handler=run)
