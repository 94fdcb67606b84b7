"""Relatório a partir de um diretório de resultados: tabelas em texto e figuras."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from views import results as views  # noqa: E402

logger = logging.getLogger(__name__)

ACCURACY_FIGURE = "accuracy_vs_length.png"
TRF_FIGURE = "trfs.png"
REPORT_FILE = "report.txt"


def accuracy_text(mean: pd.DataFrame) -> str:
    """Tabela decodificador x comprimento com a acurácia média (%) e o nível de acaso."""
    if mean.empty:
        return "(sem resultados de decodificação)\n"
    mean = mean.assign(decoder=mean["algorithm"] + "/" + mean["feature"])
    pivot = mean.pivot_table(index="decoder", columns="length", values="accuracy")
    chance = mean.groupby("length")["chance"].max()
    lines = ["Acurácia média (%) por comprimento de segmento (s)"]
    header = f"{'decodificador':<16}" + "".join(f"{length:>8g}" for length in pivot.columns)
    lines += [header, "-" * len(header)]
    for decoder, row in pivot.iterrows():
        lines.append(f"{decoder:<16}" + "".join(f"{100 * v:>8.1f}" for v in row.to_numpy()))
    lines.append(f"{'acaso (95%)':<16}" + "".join(f"{100 * chance[c]:>8.1f}" for c in pivot.columns))
    return "\n".join(lines) + "\n"


def plot_accuracy(mean: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (algorithm, feature), group in mean.groupby(["algorithm", "feature"], sort=True):
        style = "-" if feature == "onsets" else "--"
        ax.errorbar(group["length"], 100 * group["accuracy"], yerr=100 * group["sem"].fillna(0.0),
                    linestyle=style, marker="o", capsize=2, label=f"{algorithm}/{feature}")
    chance = mean.groupby("length")["chance"].max()
    ax.plot(chance.index, 100 * chance.to_numpy(), color="grey", linestyle=":", label="acaso (95%)")
    ax.set_xscale("log")
    ax.set_xlabel("Comprimento do segmento (s)")
    ax.set_ylabel("Acurácia (%)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trfs(curves: pd.DataFrame, path: Path) -> Path:
    main = curves[~curves["label"].str.endswith("/null")]
    features = sorted(main["feature"].unique())
    roles = [r for r in ("attended", "ignored", "difference") if r in set(main["role"])]
    fig, axes = plt.subplots(len(roles), len(features), figsize=(5 * len(features), 2.6 * len(roles)),
                             squeeze=False, sharex=True)
    for i, role in enumerate(roles):
        for j, feature in enumerate(features):
            ax = axes[i][j]
            label = f"{feature}/{role}"
            for channel, g in curves[curves["label"] == label].groupby("channel", sort=True):
                ax.plot(1000 * g["latency"], g["value"], label=channel)
            for channel, g in curves[curves["label"] == f"{label}/null"].groupby("channel", sort=True):
                ax.plot(1000 * g["latency"], g["value"], color="black", linewidth=0.7)
            ax.axvline(0, color="grey", linewidth=0.5)
            ax.set_title(label, fontsize=9)
            if i == len(roles) - 1:
                ax.set_xlabel("Latência (ms)")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(folder: str | Path) -> str:
    """Escreve report.txt e as figuras em `folder`; devolve o texto."""
    folder = Path(folder)
    results = views.read_csv(folder / views.RESULTS_FILE)
    mean = views.mean_accuracy(views.accuracy_table(results)) if not results.empty else pd.DataFrame()
    text = accuracy_text(mean)
    if not mean.empty:
        plot_accuracy(mean, folder / ACCURACY_FIGURE)

    summary_path = folder / views.SUMMARY_FILE
    if summary_path.exists():
        summary = views.read_json(summary_path)
        for feature, stats in sorted(summary.get("markers", {}).items()):
            text += (f"\nMarcadores ({feature}): {stats['n_significant']}/{len(stats['participants'])} "
                     f"participantes significativos (p < {stats['bonferroni_alpha']:.4g})\n")
        for row in summary.get("comparisons", []):
            text += (f"{row['length']:g} s: {row['better']} > {row['worse']}  "
                     f"t={row['t'] if row['t'] is not None else float('nan'):.2f}  "
                     f"p={row['p'] if row['p'] is not None else float('nan'):.4f}\n")
    trf_path = folder / views.TRF_FILE
    if trf_path.exists():
        plot_trfs(views.read_csv(trf_path), folder / TRF_FIGURE)
    clusters_path = folder / views.CLUSTERS_FILE
    if clusters_path.exists():
        payload = views.read_json(clusters_path)
        text += "\nClusters retidos nos TRFs:\n"
        for label, test in sorted(payload["tests"].items()):
            for c in test["clusters"]:
                if c["retained"]:
                    text += (f"  {label} [{c['channel']}] {1000 * c['start_latency']:.0f}"
                             f"–{1000 * c['end_latency']:.0f} ms  p={c['p_value']:.4f}\n")
    (folder / REPORT_FILE).write_text(text, encoding="utf-8")
    logger.info(f"Relatório gravado em {folder / REPORT_FILE}")
    return text
