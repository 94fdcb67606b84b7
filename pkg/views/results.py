"""Escrita dos resultados: CSVs em formato longo e resumos JSON."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

from core.linear import Trf
from handlers.evaluation import chance_level

logger = logging.getLogger(__name__)

# --- Arquivos ---
RESULTS_FILE = "results.csv"
MARKERS_FILE = "markers.csv"
CORRELATIONS_FILE = "trial_correlations.csv"
SUMMARY_FILE = "summary.json"
TRF_FILE = "trf_curves.csv"
CLUSTERS_FILE = "clusters.json"
TRAINING_LOG_FILE = "cnn_training.csv"

RESULT_COLUMNS = ["participant", "algorithm", "feature", "length", "trial", "start",
                  "rho_attended", "rho_ignored", "score", "decision", "truth", "correct"]
MARKER_COLUMNS = ["participant", "feature", "trial", "start", "length", "null",
                  "rho_attended", "rho_ignored", "delta"]
CORRELATION_COLUMNS = ["participant", "feature", "trial", "role", "stream", "null", "rho"]
TRAINING_COLUMNS = ["participant", "feature", "test_trial", "kernel", "blocks", "epoch", "train_loss", "val_rho"]
FLOAT_FORMAT = "%.10g"


def _frame(rows: Iterable[dict[str, Any]], columns: Sequence[str], sort: Sequence[str]) -> pd.DataFrame:
    df = pd.DataFrame(list(rows), columns=list(columns))
    if not df.empty:
        df = df.sort_values(list(sort), kind="mergesort").reset_index(drop=True)
    return df


def results_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    return _frame(rows, RESULT_COLUMNS, ["participant", "algorithm", "feature", "length", "trial", "start"])


def markers_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    return _frame(rows, MARKER_COLUMNS, ["participant", "feature", "null", "trial", "start"])


def correlations_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    return _frame(rows, CORRELATION_COLUMNS, ["participant", "feature", "role", "stream", "null", "trial"])


def training_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    return _frame(rows, TRAINING_COLUMNS, ["participant", "feature", "test_trial", "kernel", "blocks", "epoch"])


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"{len(df)} linhas gravadas em {path}")
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    from utils.errors import IngestionError

    path = Path(path)
    try:
        return pd.read_csv(path)
    except FileNotFoundError as e:
        raise IngestionError("Arquivo de resultados não encontrado", path) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"CSV ilegível: {e}", path) from e


def accuracy_table(results: pd.DataFrame) -> pd.DataFrame:
    """Acurácia e número de segmentos por (participante, algoritmo, feature, comprimento)."""
    keys = ["participant", "algorithm", "feature", "length"]
    table = (results.groupby(keys, sort=True)["correct"]
             .agg(accuracy="mean", n_segments="size").reset_index())
    table["accuracy"] = table["accuracy"].astype(float)
    return table


def mean_accuracy(table: pd.DataFrame) -> pd.DataFrame:
    """Média entre participantes, com o nível de acaso do número médio de segmentos."""
    out = (table.groupby(["algorithm", "feature", "length"], sort=True)
           .agg(accuracy=("accuracy", "mean"), sem=("accuracy", "sem"),
                n_participants=("participant", "nunique"), n_segments=("n_segments", "mean"))
           .reset_index())
    out["chance"] = [chance_level(max(1, int(round(n)))) for n in out["n_segments"]]
    return out


def accuracy_lookup(table: pd.DataFrame) -> dict[str, dict[float, dict[str, float]]]:
    """{'algoritmo/feature': {comprimento: {participante: acurácia}}}."""
    out: dict[str, dict[float, dict[str, float]]] = {}
    for row in table.itertuples(index=False):
        key = f"{row.algorithm}/{row.feature}"
        out.setdefault(key, {}).setdefault(float(row.length), {})[row.participant] = float(row.accuracy)
    return out


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(payload: dict[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, indent=2, ensure_ascii=False, sort_keys=True)
    return path


def read_json(path: str | Path) -> dict[str, Any]:
    from database.database import read_json as _read

    return _read(path)


def trf_curves(trfs: dict[str, Trf]) -> pd.DataFrame:
    """Uma linha por (rótulo, canal, latência)."""
    rows = []
    for label in sorted(trfs):
        trf = trfs[label]
        for ch, name in enumerate(trf.channels):
            for latency, value in zip(trf.latencies, trf.coefficients[ch]):
                rows.append({"label": label, "feature": trf.kind.short_name, "role": trf.role.value,
                             "channel": name, "latency": float(latency), "value": float(value)})
    return pd.DataFrame(rows, columns=["label", "feature", "role", "channel", "latency", "value"])


def clusters_payload(results: dict[str, Any], m: int, alpha: float = 0.05) -> dict[str, Any]:
    """ClusterResult por rótulo em JSON; `retained` marca p < alpha/m."""
    out = {"bonferroni_m": m, "alpha": alpha, "tests": {}}
    for label in sorted(results):
        r = results[label]
        out["tests"][label] = {
            "threshold": r.threshold, "statistic": r.statistic, "p_value": r.p_value,
            "clusters": [{"channel": c.channel, "start_latency": c.start_latency, "end_latency": c.end_latency,
                          "size": c.size, "mass": c.mass, "p_value": c.p_value,
                          "retained": bool(c.p_value < alpha / m)} for c in r.clusters],
        }
    return out
