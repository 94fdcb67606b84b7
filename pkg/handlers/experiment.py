"""Orquestra o experimento completo: validação cruzada aninhada, decodificação, TRFs e estatística."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from core.features import FeatureKind
from core.linear import LagSpec, SpeakerRole, Trf
from core.trf_analysis import (TrfSet, average_by_shift, bonferroni, cluster_permutation_test,
                               crossval_trf, difference_trf, group_nulls, mean_trf, null_trfs)
from database.database import load_dataset
from database.models import LABELS, Participant, other_label
from handlers.evaluation import (backward_model_statistics, cca_designs, cca_segment_margins,
                                 compare_algorithms, make_nested_cv, marker_significance,
                                 markers_backward, null_markers, null_trial_correlations,
                                 segment_trial, trial_correlations, tune_backward, tune_cca, tune_cnn)
from utils.config import ExperimentConfig, n_jobs as default_jobs
from utils.errors import ConfigError, DegenerateTestError, ParameterError
from utils.logger import log_header, log_status
from utils.seeding import spawn
from views import results as views

logger = logging.getLogger(__name__)

TRF_TESTS = 12


@dataclass
class ParticipantOutput:
    name: str
    results: list[dict] = field(default_factory=list)
    markers: list[dict] = field(default_factory=list)
    correlations: list[dict] = field(default_factory=list)
    training: list[dict] = field(default_factory=list)
    trfs: list[Trf] = field(default_factory=list)
    # (feature, papel) -> TRFs nulos médios por deslocamento
    nulls: dict[tuple[str, str], list[Trf]] = field(default_factory=dict)
    selections: list[dict] = field(default_factory=list)


@dataclass
class ExperimentReport:
    output: Path
    files: dict[str, Path]
    summary: dict[str, Any]


def _decision_rows(name, algorithm, kind, length, trial, starts, scores, rho_att=None, rho_ign=None,
                   attended_first_wins=None):
    rows = []
    truth = trial.attended_label
    for i, (start, score) in enumerate(zip(starts, scores)):
        if attended_first_wins is None:
            correct = bool(score > 0)
        else:
            correct = bool(attended_first_wins[i])
        rows.append({
            "participant": name, "algorithm": algorithm, "feature": kind.short_name, "length": length,
            "trial": trial.index, "start": float(start),
            "rho_attended": float(rho_att[i]) if rho_att is not None else np.nan,
            "rho_ignored": float(rho_ign[i]) if rho_ign is not None else np.nan,
            "score": float(score), "decision": truth if correct else other_label(truth),
            "truth": truth, "correct": correct,
        })
    return rows


def _reconstruction_rows(out, algorithm, kind, tuned, trials, config):
    for t in tuned:
        trial = trials[t.test_trial]
        for length in config.segment_lengths:
            segments = segment_trial(trial, length, config.hop)
            markers = markers_backward(t.model, trial, segments)
            out.results += _decision_rows(
                out.name, algorithm, kind, length, trial, [m.start for m in markers], [m.delta for m in markers],
                [m.rho_attended for m in markers], [m.rho_ignored for m in markers])


def _marker_rows(out, kind, tuned, trials, config, seed):
    for t, s in zip(tuned, spawn(seed, len(tuned))):
        trial = trials[t.test_trial]
        segments = segment_trial(trial, config.marker_segment, config.marker_segment)
        if len(segments) < 2:
            continue
        recon = t.model.reconstruct(trial.eeg).samples
        for is_null, markers in ((False, markers_backward(t.model, trial, segments)),
                                 (True, null_markers(t.model, trial, segments, s, reconstruction=recon))):
            out.markers += [{"participant": out.name, "feature": kind.short_name, "trial": trial.index,
                             "start": m.start, "length": m.length, "null": is_null,
                             "rho_attended": m.rho_attended, "rho_ignored": m.rho_ignored, "delta": m.delta}
                            for m in markers]


def _correlation_rows(out, kind, tuned_by_role, trials):
    for role, tuned in tuned_by_role.items():
        for c in trial_correlations(tuned, trials):
            out.correlations.append({"participant": out.name, "feature": kind.short_name, "trial": c.trial,
                                     "role": role.value, "stream": c.stream.value, "null": False, "rho": c.rho})
        for stream in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED):
            for i, rho in enumerate(null_trial_correlations(tuned, trials, stream)):
                out.correlations.append({"participant": out.name, "feature": kind.short_name, "trial": i,
                                         "role": role.value, "stream": stream.value, "null": True, "rho": rho})


def _cca_rows(out, kind, tuned, trials, config):
    first, _ = tuned[0].model
    designs = cca_designs(trials, kind, first.eeg_lags, first.feature_lags)
    for t in tuned:
        model, lda = t.model
        trial = trials[t.test_trial]
        # candidato A é sempre o primeiro rótulo; o escore é orientado ao locutor atendido
        attended_first = trial.attended_label == LABELS[0]
        for length in config.segment_lengths:
            segments = segment_trial(trial, length, config.hop)
            margins = cca_segment_margins(model, lda, designs[t.test_trial], segments, attended_first)
            chose_first = margins >= 0
            wins = chose_first == attended_first
            scores = margins if attended_first else -margins
            out.results += _decision_rows(out.name, "cca", kind, length, trial,
                                          [s.start_s for s in segments], scores, attended_first_wins=wins)


def _trf_analysis(out, kind, trials, config, seed):
    att = crossval_trf(trials, kind, SpeakerRole.ATTENDED)
    ign = crossval_trf(trials, kind, SpeakerRole.IGNORED)
    out.trfs += [att, ign, difference_trf(att, ign)]
    per_role = {}
    for role in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED):
        # mesma semente nos dois papéis: deslocamentos idênticos para a diferença
        nulls = null_trfs(trials, kind, config.n_shifts, config.min_shift, seed, role)
        per_role[role] = average_by_shift(nulls, len(trials))
    diff = [Trf(a.coefficients - b.coefficients, a.lags, a.channels, a.kind, SpeakerRole.NULL)
            for a, b in zip(per_role[SpeakerRole.ATTENDED], per_role[SpeakerRole.IGNORED])]
    for role, nulls in ((SpeakerRole.ATTENDED, per_role[SpeakerRole.ATTENDED]),
                        (SpeakerRole.IGNORED, per_role[SpeakerRole.IGNORED]), (SpeakerRole.DIFFERENCE, diff)):
        out.nulls[(kind.short_name, role.value)] = nulls


def run_participant(participant: Participant, config: ExperimentConfig, seed, decode: bool = True) -> ParticipantOutput:
    """Todas as análises de um participante (um job independente)."""
    started = time.perf_counter()
    out = ParticipantOutput(participant.name)
    trials = participant.trials
    plan_seed, marker_seed, cnn_seed, trf_seed = spawn(seed, 4)
    plan = make_nested_cv(len(trials), config.inner_folds, plan_seed)
    algorithms = config.algorithms if decode else ()
    for kind in (FeatureKind.parse(f) for f in config.features):
        if "linear" in algorithms:
            tuned = {role: tune_backward(plan, trials, kind, role)
                     for role in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED)}
            attended = tuned[SpeakerRole.ATTENDED]
            _reconstruction_rows(out, "linear", kind, attended, trials, config)
            _marker_rows(out, kind, attended, trials, config, marker_seed)
            _correlation_rows(out, kind, tuned, trials)
            out.selections += [{"algorithm": "linear", "feature": kind.short_name, "test_trial": trials[t.test_trial].index,
                                **t.selection} for t in attended]
        if "cnn" in algorithms:
            cnn = tune_cnn(plan, trials, kind, config.cnn, cnn_seed)
            _reconstruction_rows(out, "cnn", kind, cnn, trials, config)
            for t in cnn:
                out.selections.append({"algorithm": "cnn", "feature": kind.short_name,
                                       "test_trial": trials[t.test_trial].index, **t.selection})
                out.training += [{"participant": out.name, "feature": kind.short_name,
                                  "test_trial": trials[t.test_trial].index, "kernel": t.model.hyper.kernel,
                                  "blocks": t.model.hyper.blocks, "epoch": e, "train_loss": loss, "val_rho": rho}
                                 for e, loss, rho in t.model.history]
        if "cca" in algorithms:
            cca = tune_cca(plan, trials, kind, config.cca.shrinkage_grid, config.cca.lda_segment,
                           LagSpec.from_seconds(0.0, config.cca.eeg_lag_s, trials[0].fs),
                           LagSpec.from_seconds(0.0, config.cca.feature_lag_s, trials[0].fs))
            _cca_rows(out, kind, cca, trials, config)
            out.selections += [{"algorithm": "cca", "feature": kind.short_name,
                                "test_trial": trials[t.test_trial].index, **t.selection} for t in cca]
        if config.trf:
            _trf_analysis(out, kind, trials, config, trf_seed)
    logger.info(f"Participante {participant.name} concluído em {time.perf_counter() - started:.1f} s.")
    return out


def _trf_group(outputs: list[ParticipantOutput], config: ExperimentConfig, seed, jobs: int):
    trf_set = TrfSet()
    for out in outputs:
        for trf in out.trfs:
            trf_set.add(out.name, trf)
    curves, results = {}, {}
    for (kind, role), members in sorted(trf_set.members.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        label = f"{kind.short_name}/{role.value}"
        curves[label] = trf_set.grand_average(kind, role)
        nulls = group_nulls([out.nulls[(kind.short_name, role.value)] for out in outputs])
        curves[f"{label}/null"] = mean_trf(nulls)
        if len(members) >= 2:
            results[label] = cluster_permutation_test(trf_set.get(kind, role), nulls, config.n_perm,
                                                      config.threshold_pct, seed, jobs)
    return curves, results


def summarize(results, markers, correlations, alpha: float = 0.05) -> dict[str, Any]:
    """Resumo a partir dos CSVs (também usado por `aad stats`)."""
    summary: dict[str, Any] = {}
    if not results.empty:
        table = views.accuracy_table(results)
        summary["accuracy"] = views.mean_accuracy(table).to_dict(orient="records")
        summary["per_participant"] = table.to_dict(orient="records")
        summary["comparisons"] = compare_algorithms(views.accuracy_lookup(table))
    if not markers.empty:
        summary["markers"] = {}
        for feature, group in markers.groupby("feature", sort=True):
            real = {p: g["delta"].to_numpy() for p, g in group[~group["null"]].groupby("participant")}
            null = {p: g["delta"].to_numpy() for p, g in group[group["null"]].groupby("participant")}
            summary["markers"][feature] = marker_significance(real, null, alpha)
    if not correlations.empty:
        summary["backward_models"] = {}
        for feature, group in correlations.groupby("feature", sort=True):
            # média por participante de cada grupo (modelo, fluxo)
            real, null = {}, {}
            for (role, stream, is_null), g in group.groupby(["role", "stream", "null"]):
                target = null if is_null else real
                target[(role, stream)] = g.groupby("participant")["rho"].mean().to_numpy() if not is_null \
                    else g["rho"].to_numpy()
            try:
                summary["backward_models"][feature] = backward_model_statistics(real, null, alpha)
            except (ParameterError, DegenerateTestError) as e:
                logger.warning(f"Estatística dos modelos backward ({feature}) não calculada: {e}")
    return summary


def run_experiment(config: ExperimentConfig, participants: list[Participant] | None = None,
                   n_jobs: int | None = None, decode: bool = True) -> ExperimentReport:
    """Executa o experimento do `config`; com `decode=False` só a análise de TRFs."""
    config.validate()
    if not decode and not config.trf:
        raise ConfigError("Nada a executar: decodificação e TRFs desligadas.")
    jobs = n_jobs or default_jobs()
    log_header("Experimento de decodificação de atenção", semente=config.seed, saida=config.output,
               trf="sim" if config.trf else "não")
    participants = participants if participants is not None else load_dataset(
        config.dataset, tuple(FeatureKind.parse(f) for f in config.features))
    log_status(f"{len(participants)} participantes; algoritmos {list(config.algorithms)}; "
               f"features {list(config.features)}; {jobs} job(s).", "info")
    participant_seeds = spawn(config.seed, len(participants) + 1)
    group_seed = participant_seeds.pop()
    outputs = Parallel(n_jobs=jobs)(
        delayed(run_participant)(p, config, s, decode) for p, s in zip(participants, participant_seeds))

    output = Path(config.output)
    output.mkdir(parents=True, exist_ok=True)
    results = views.results_frame(r for o in outputs for r in o.results)
    markers = views.markers_frame(r for o in outputs for r in o.markers)
    correlations = views.correlations_frame(r for o in outputs for r in o.correlations)
    files = {"results": views.write_csv(results, output / views.RESULTS_FILE)}
    if not markers.empty:
        files["markers"] = views.write_csv(markers, output / views.MARKERS_FILE)
    if not correlations.empty:
        files["correlations"] = views.write_csv(correlations, output / views.CORRELATIONS_FILE)
    training = views.training_frame(r for o in outputs for r in o.training)
    if not training.empty:
        files["training"] = views.write_csv(training, output / views.TRAINING_LOG_FILE)

    summary = summarize(results, markers, correlations)
    summary["config"] = {"seed": config.seed, "algorithms": list(config.algorithms),
                         "features": list(config.features), "segment_lengths": list(config.segment_lengths),
                         "hop": config.hop, "participants": [p.name for p in participants]}
    summary["selections"] = {o.name: o.selections for o in outputs}
    if config.trf:
        curves, clusters = _trf_group(outputs, config, group_seed, jobs)
        files["trf"] = views.write_csv(views.trf_curves(curves), output / views.TRF_FILE)
        payload = views.clusters_payload(clusters, TRF_TESTS)
        files["clusters"] = views.write_json(payload, output / views.CLUSTERS_FILE)
        summary["trf_tests"] = {label: {"p": r.p_value, "significant": bonferroni([r.p_value], TRF_TESTS)[0]}
                                for label, r in clusters.items()}
    files["summary"] = views.write_json(summary, output / views.SUMMARY_FILE)
    log_status(f"Resultados gravados em {output}", "success")
    return ExperimentReport(output, files, summary)
