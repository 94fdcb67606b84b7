"""aad stats: estatística a partir de um diretório de resultados."""

import logging
from pathlib import Path

import pandas as pd

from handlers.experiment import summarize
from utils.logger import log_status
from views import results as views

logger = logging.getLogger(__name__)


def _optional(path: Path) -> pd.DataFrame:
    return views.read_csv(path) if path.exists() else pd.DataFrame()


def run(args) -> int:
    folder = Path(args.results)
    results = views.read_csv(folder / views.RESULTS_FILE)
    summary = summarize(results, _optional(folder / views.MARKERS_FILE),
                        _optional(folder / views.CORRELATIONS_FILE), args.alpha)
    out = views.write_json(summary, folder / "stats.json")
    for feature, stats in sorted(summary.get("markers", {}).items()):
        log_status(f"Marcadores {feature}: {stats['n_significant']}/{len(stats['participants'])} "
                   f"participantes significativos", "info")
    for row in summary.get("comparisons", []):
        logger.info(f"{row['length']:g} s: {row['better']} > {row['worse']} (t={row['t']:.2f}, p={row['p']:.4f})")
    log_status(f"Estatísticas gravadas em {out}", "success")
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("stats", help="Testes estatísticos sobre resultados existentes")
    parser.add_argument("results", help="Diretório de resultados")
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.set_defaults(handler=run)
