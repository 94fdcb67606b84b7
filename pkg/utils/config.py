"""Configuração do toolkit: variáveis de ambiente (.env) e arquivo de experimento (JSON)."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

# --- Configurações padrão ---
ALGORITHMS = ("linear", "cnn", "cca")
FEATURE_NAMES = ("envelope", "onsets")
SEGMENT_LENGTHS = (0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0)
CNN_GRID = ((3, 1), (3, 2), (3, 3), (5, 1), (5, 2), (5, 3))


def env_int(name: str, default: int) -> int:
    """Lê um inteiro do ambiente; valor inválido vira `default` com log de erro."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except (TypeError, ValueError):
        logger.error(f"{name} ('{raw}') inválido no .env! Deve ser um número inteiro. Usando {default}.")
        return default


def n_jobs() -> int:
    """Limite de paralelismo vindo de AAD_JOBS (mínimo 1)."""
    jobs = env_int("AAD_JOBS", 1)
    if jobs < 1:
        logger.warning(f"AAD_JOBS={jobs} não faz sentido, usando 1.")
        return 1
    return jobs


@dataclass(frozen=True)
class CnnBudget:
    max_epochs: int = 100
    patience: int = 5
    batch_size: int = 256
    width: int = 16
    learning_rate: float = 1e-3
    grid: tuple[tuple[int, int], ...] = CNN_GRID
    # limita janelas por época (None = todas)
    max_windows: int | None = None
    # dobras internas usadas na seleção (None = todas as do plano)
    inner_folds: int | None = None


@dataclass(frozen=True)
class CcaSettings:
    shrinkage_grid: tuple[float, ...] = (0.0, 1e-4, 1e-2)
    lda_segment: float = 5.0
    eeg_lag_s: float = 1.0
    feature_lag_s: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path
    output: Path = Path("results")
    seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS
    features: tuple[str, ...] = FEATURE_NAMES
    segment_lengths: tuple[float, ...] = SEGMENT_LENGTHS
    hop: float = 1.0
    inner_folds: int = 5
    n_shifts: int = 500
    min_shift: float = 5.0
    n_perm: int = 1000
    threshold_pct: float = 99.0
    trf: bool = False
    marker_segment: float = 5.0
    cnn: CnnBudget = field(default_factory=CnnBudget)
    cca: CcaSettings = field(default_factory=CcaSettings)

    def validate(self) -> "ExperimentConfig":
        if not self.algorithms:
            raise ConfigError("Lista de algoritmos vazia.")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"Algoritmos desconhecidos: {sorted(unknown)}")
        if not self.features:
            raise ConfigError("Lista de features vazia.")
        unknown = set(self.features) - set(FEATURE_NAMES)
        if unknown:
            raise ConfigError(f"Features desconhecidas: {sorted(unknown)}")
        if not self.segment_lengths or any(s <= 0 for s in self.segment_lengths):
            raise ConfigError("segment_lengths deve conter apenas valores positivos.")
        if self.hop <= 0:
            raise ConfigError("hop deve ser positivo.")
        if self.inner_folds < 2:
            raise ConfigError("inner_folds deve ser >= 2.")
        if self.n_shifts < 1 or self.n_perm < 1:
            raise ConfigError("n_shifts e n_perm devem ser >= 1.")
        if not 0 < self.threshold_pct < 100:
            raise ConfigError("threshold_pct deve estar em (0, 100).")
        for kernel, blocks in self.cnn.grid:
            if kernel not in (3, 5) or blocks not in (1, 2, 3):
                raise ConfigError(f"Ponto de grade CNN inválido: ({kernel}, {blocks})")
        if self.cnn.inner_folds is not None and not 1 <= self.cnn.inner_folds <= self.inner_folds:
            raise ConfigError(f"cnn.inner_folds deve estar em [1, {self.inner_folds}].")
        return self


def _build(cls, raw: dict[str, Any], where: str):
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"Chaves desconhecidas em {where}: {sorted(extra)}")
    return cls(**raw)


def config_from_dict(raw: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Constrói e valida um ExperimentConfig a partir de um dicionário (JSON já lido)."""
    raw = dict(raw)
    if "dataset" not in raw:
        raise ConfigError("Chave obrigatória 'dataset' ausente.")
    base_dir = base_dir or Path.cwd()
    try:
        cnn_raw = dict(raw.pop("cnn", {}))
        if "grid" in cnn_raw:
            cnn_raw["grid"] = tuple(tuple(int(v) for v in point) for point in cnn_raw["grid"])
        cca_raw = dict(raw.pop("cca", {}))
        if "shrinkage_grid" in cca_raw:
            cca_raw["shrinkage_grid"] = tuple(float(v) for v in cca_raw["shrinkage_grid"])
        for key in ("algorithms", "features"):
            if key in raw:
                raw[key] = tuple(raw[key])
        if "segment_lengths" in raw:
            raw["segment_lengths"] = tuple(float(v) for v in raw["segment_lengths"])
        raw["dataset"] = (base_dir / raw["dataset"]).resolve()
        raw["output"] = (base_dir / raw.get("output", "results")).resolve()
        if "seed" not in raw:
            raw["seed"] = env_int("AAD_SEED", 0)
        config = _build(ExperimentConfig, raw, "config")
        config = replace(config, cnn=_build(CnnBudget, cnn_raw, "cnn"), cca=_build(CcaSettings, cca_raw, "cca"))
    except TypeError as e:
        raise ConfigError(f"Configuração malformada: {e}") from e
    return config.validate()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Arquivo de configuração não encontrado: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido em {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} deve conter um objeto JSON.")
    logger.info(f"Configuração carregada de {path}")
    return config_from_dict(raw, base_dir=path.parent)
