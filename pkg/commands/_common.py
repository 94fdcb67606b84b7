"""Utilidades compartilhadas pelos subcomandos."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from utils.config import ALGORITHMS, FEATURE_NAMES, ExperimentConfig, config_from_dict, load_config
from utils.errors import ConfigError


def add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("dataset", nargs="?", help="Diretório do dataset (ou use --config)")
    parser.add_argument("--config", help="Arquivo JSON de experimento")
    parser.add_argument("--out", help="Diretório de saída (padrão: results)")
    parser.add_argument("--seed", type=int, help="Semente (sobrepõe a do config)")
    parser.add_argument("--feature", action="append", choices=FEATURE_NAMES,
                        help="Feature a usar (repetível; padrão: todas)")


def experiment_config(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    """Config a partir de --config ou do dataset posicional, com sobreposições da linha de comando."""
    if args.config:
        config = load_config(args.config)
        if args.dataset:
            config = replace(config, dataset=Path(args.dataset).resolve())
    elif args.dataset:
        config = config_from_dict({"dataset": args.dataset}, Path.cwd())
    else:
        raise ConfigError("Informe o diretório do dataset ou --config.")
    changes = {k: v for k, v in overrides.items() if v is not None}
    if args.out:
        changes["output"] = Path(args.out).resolve()
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.feature:
        changes["features"] = tuple(dict.fromkeys(args.feature))
    return replace(config, **changes).validate()


def algorithms_arg(values) -> tuple[str, ...] | None:
    if not values:
        return None
    unknown = set(values) - set(ALGORITHMS)
    if unknown:
        raise ConfigError(f"Algoritmos desconhecidos: {sorted(unknown)}")
    return tuple(dict.fromkeys(values))
