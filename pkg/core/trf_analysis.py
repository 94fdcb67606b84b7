"""Análise de TRFs: validação cruzada, TRFs de diferença, TRFs nulos e teste de clusters por permutação."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, ndimage

from core.features import FeatureKind
from core.linear import TRF_LAGS, LagSpec, SpeakerRole, Trf, build_lag_matrix, trf_from_gram
from utils.errors import ParameterError
from utils.seeding import spawn

if TYPE_CHECKING:
    from database.models import TrialBundle

logger = logging.getLogger(__name__)

# --- Configurações ---
N_SHIFTS = 500
MIN_SHIFT_S = 5.0
N_PERM = 1000
THRESHOLD_PCT = 99.0
ALPHA = 0.05
# blocos de permutação com sementes próprias; fixo para não depender de AAD_JOBS
PERM_CHUNKS = 8


@dataclass(frozen=True)
class Cluster:
    channel: str
    start_latency: float
    end_latency: float
    size: int
    mass: float
    p_value: float


@dataclass(frozen=True)
class ClusterResult:
    clusters: list[Cluster]
    threshold: float
    statistic: int
    p_value: float
    null_sizes: np.ndarray = field(repr=False)

    @property
    def p_values(self) -> list[float]:
        return [c.p_value for c in self.clusters]


@dataclass
class TrfSet:
    """TRFs por participante, indexados por (feature, papel)."""
    lags: LagSpec = TRF_LAGS
    channels: tuple[str, ...] = ()
    members: dict[tuple[FeatureKind, SpeakerRole], dict[str, Trf]] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def add(self, participant: str, trf: Trf) -> None:
        if not self.channels:
            self.channels = trf.channels
        if trf.lags != self.lags or trf.channels != self.channels:
            raise ParameterError(f"TRF de {participant} com eixos incompatíveis com o conjunto.")
        self.members.setdefault((trf.kind, trf.role), {})[participant] = trf
        self._cache.pop((trf.kind, trf.role), None)

    def get(self, kind: FeatureKind, role: SpeakerRole) -> list[Trf]:
        group = self.members.get((kind, role), {})
        return [group[name] for name in sorted(group)]

    def grand_average(self, kind: FeatureKind, role: SpeakerRole) -> Trf:
        key = (kind, role)
        if key not in self._cache:
            trfs = self.get(kind, role)
            if not trfs:
                raise ParameterError(f"Nenhum TRF para {kind.value}/{role.value}.")
            self._cache[key] = mean_trf(trfs)
        return self._cache[key]


def mean_trf(trfs: Sequence[Trf]) -> Trf:
    first = trfs[0]
    if any(not first.same_axes(t) for t in trfs[1:]):
        raise ParameterError("TRFs com eixos diferentes não podem ser promediados.")
    coefficients = np.mean([t.coefficients for t in trfs], axis=0)
    return Trf(coefficients, first.lags, first.channels, first.kind, first.role)


def _trial_grams(trials: Sequence["TrialBundle"], kind: FeatureKind, role: SpeakerRole, lags: LagSpec):
    grams, crosses, rows, designs = [], [], [], []
    for trial in trials:
        X = build_lag_matrix(trial.feature(role, kind), lags)
        grams.append(X.T @ X)
        crosses.append(X.T @ trial.eeg.data.T)
        rows.append(X.shape[0])
        designs.append(X)
    return grams, crosses, rows, designs


def crossval_trf(trials: Sequence["TrialBundle"], kind: FeatureKind, role: SpeakerRole = SpeakerRole.ATTENDED,
                 lags: LagSpec = TRF_LAGS, return_folds: bool = False):
    """Deixa-um-ensaio-de-fora: um TRF por ensaio retido, devolvidos como média."""
    if len(trials) < 2:
        raise ParameterError(f"Validação cruzada de TRF exige >= 2 ensaios (recebido {len(trials)}).")
    if role not in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED):
        raise ParameterError(f"Papel inválido para ajuste: {role.value}")
    grams, crosses, rows, _ = _trial_grams(trials, kind, role, lags)
    gram_total, cross_total, rows_total = sum(grams), sum(crosses), sum(rows)
    channels = trials[0].eeg.channels
    folds = [trf_from_gram(gram_total - g, cross_total - c, rows_total - r, lags, channels, kind, role)
             for g, c, r in zip(grams, crosses, rows)]
    average = mean_trf(folds)
    logger.debug(f"TRF {kind.value}/{role.value}: {len(folds)} dobras promediadas")
    return (average, folds) if return_folds else average


def difference_trf(attended: Trf, ignored: Trf) -> Trf:
    """Atendido menos ignorado, elemento a elemento."""
    if not attended.same_axes(ignored) or attended.kind != ignored.kind:
        raise ParameterError("TRFs atendido/ignorado com eixos ou features diferentes.")
    return Trf(attended.coefficients - ignored.coefficients, attended.lags, attended.channels,
               attended.kind, SpeakerRole.DIFFERENCE)


def draw_shifts(n_samples: int, n_shifts: int, min_shift: int, rng: np.random.Generator) -> np.ndarray:
    """Deslocamentos circulares distintos em [min_shift, n_samples - min_shift]."""
    candidates = n_samples - 2 * min_shift + 1
    if candidates < n_shifts:
        raise ParameterError(
            f"Intervalo de deslocamento pequeno demais: {max(candidates, 0)} opções para {n_shifts} deslocamentos.")
    return np.sort(rng.choice(candidates, size=n_shifts, replace=False) + min_shift)


def _null_chunk(shifts, designs, eeg_rows, factors, channels, lags, kind):
    out = []
    for shift in shifts:
        crosses = [X.T @ np.roll(Y, -int(shift), axis=0) for X, Y in zip(designs, eeg_rows)]
        total = sum(crosses)
        for factor, cross in zip(factors, crosses):
            weights = linalg.cho_solve(factor, total - cross)
            out.append(Trf(weights.T, lags, channels, kind, SpeakerRole.NULL))
    return out


def null_trfs(trials: Sequence["TrialBundle"], kind: FeatureKind, n_shifts: int = N_SHIFTS,
              min_shift: float = MIN_SHIFT_S, seed: int | np.random.SeedSequence = 0,
              role: SpeakerRole = SpeakerRole.ATTENDED, lags: LagSpec = TRF_LAGS, n_jobs: int = 1) -> list[Trf]:
    """Repete a validação cruzada com feature e EEG desalinhados circularmente.

    O desalinhamento é aplicado girando o EEG contra a feature fixa, o que
    mantém as matrizes XᵀX da feature (e suas fatorações) válidas para todos
    os deslocamentos. Devolve n_shifts x n_ensaios TRFs nulos, ordenados por
    deslocamento e depois por ensaio retido.
    """
    if n_shifts < 1:
        raise ParameterError("n_shifts deve ser >= 1.")
    if len(trials) < 2:
        raise ParameterError("TRFs nulos exigem >= 2 ensaios.")
    span = lags.taps / lags.fs
    if min_shift <= span:
        raise ParameterError(f"min_shift ({min_shift} s) deve exceder a extensão do TRF ({span} s).")
    fs = trials[0].fs
    rng = np.random.default_rng(seed)
    shifts = draw_shifts(min(t.n_samples for t in trials), n_shifts, int(round(min_shift * fs)), rng)

    grams, _, rows, designs = _trial_grams(trials, kind, role, lags)
    gram_total, rows_total = sum(grams), sum(rows)
    factors = []
    for g, r in zip(grams, rows):
        fold_gram = gram_total - g
        lam = np.trace(fold_gram) / ((rows_total - r) * fold_gram.shape[0])
        factors.append(linalg.cho_factor(fold_gram + lam * np.eye(fold_gram.shape[0])))
    eeg_rows = [trial.eeg.data.T for trial in trials]
    channels = trials[0].eeg.channels

    chunks = [c for c in np.array_split(shifts, max(1, n_jobs * 4)) if c.size]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_null_chunk)(chunk, designs, eeg_rows, factors, channels, lags, kind) for chunk in chunks)
    nulls = [trf for part in results for trf in part]
    logger.debug(f"{len(nulls)} TRFs nulos ({n_shifts} deslocamentos x {len(trials)} ensaios)")
    return nulls


def average_by_shift(nulls: Sequence[Trf], n_trials: int) -> list[Trf]:
    """Média dos TRFs nulos de cada deslocamento sobre os ensaios retidos (mesma escala do TRF do participante)."""
    if n_trials < 1 or len(nulls) % n_trials:
        raise ParameterError(f"{len(nulls)} TRFs nulos não se dividem em blocos de {n_trials} ensaios.")
    return [mean_trf(nulls[i:i + n_trials]) for i in range(0, len(nulls), n_trials)]


def group_nulls(per_participant: Sequence[Sequence[Trf]]) -> list[Trf]:
    """Média entre participantes, deslocamento a deslocamento."""
    counts = {len(n) for n in per_participant}
    if len(counts) != 1:
        raise ParameterError("Participantes com números diferentes de TRFs nulos.")
    return [mean_trf(list(group)) for group in zip(*per_participant)]


def _stack(trfs: Sequence[Trf]) -> np.ndarray:
    first = trfs[0]
    if any(not first.same_axes(t) for t in trfs[1:]):
        raise ParameterError("TRFs com eixos diferentes.")
    return np.stack([t.coefficients for t in trfs])


def _max_clusters(power: np.ndarray, threshold: float) -> np.ndarray:
    """Tamanho do maior cluster por permutação de `power` (P x C x taps), entre canais."""
    run_len = np.zeros(power.shape[:-1])
    best_len = np.zeros(power.shape[:-1])
    for t in range(power.shape[-1]):
        run_len = np.where(power[..., t] > threshold, run_len + 1, 0)
        best_len = np.maximum(best_len, run_len)
    return best_len.max(axis=-1)


def _perm_chunk(coefs: np.ndarray, n_perm: int, threshold: float, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = coefs.shape[0]
    signs = rng.choice([-1.0, 1.0], size=(n_perm, n))
    means = np.tensordot(signs, coefs, axes=(1, 0)) / n
    return _max_clusters(means ** 2, threshold)


def find_clusters(power: np.ndarray, threshold: float) -> list[tuple[int, int, int, float]]:
    """Trechos máximos acima do limiar por canal: (canal, início, fim inclusivo, massa)."""
    found = []
    for ch, row in enumerate(power):
        labels, count = ndimage.label(row > threshold)
        for label in range(1, count + 1):
            idx = np.flatnonzero(labels == label)
            found.append((ch, int(idx[0]), int(idx[-1]), float(row[idx].sum())))
    return found


def cluster_permutation_test(participant_trfs: Sequence[Trf], null_trfs: Sequence[Trf],
                             n_perm: int = N_PERM, threshold_pct: float = THRESHOLD_PCT,
                             seed: int | np.random.SeedSequence = 0, n_jobs: int = 1) -> ClusterResult:
    """Teste de cluster de amostra única com inversão aleatória de sinais.

    Limiar: percentil da potência instantânea dos TRFs nulos. Estatística:
    tamanho do maior cluster. p = fração das permutações cujo maior
    cluster tem tamanho >= ao observado; a massa só ordena os clusters.
    """
    if len(participant_trfs) < 2:
        raise ParameterError("O teste exige >= 2 TRFs de participantes.")
    if not null_trfs:
        raise ParameterError("Conjunto de TRFs nulos vazio.")
    coefs = _stack(participant_trfs)
    if not participant_trfs[0].same_axes(null_trfs[0]):
        raise ParameterError("TRFs nulos com eixos diferentes dos participantes.")
    threshold = float(np.percentile(_stack(null_trfs) ** 2, threshold_pct))

    observed = coefs.mean(axis=0) ** 2
    found = find_clusters(observed, threshold)

    seeds = spawn(seed, PERM_CHUNKS)
    sizes = np.array_split(np.arange(n_perm), len(seeds))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_perm_chunk)(coefs, idx.size, threshold, s) for idx, s in zip(sizes, seeds) if idx.size)
    null_len = np.concatenate(parts)

    def p_of(size: int) -> float:
        return float(np.mean(null_len >= size)) if size else 1.0

    first = participant_trfs[0]
    latencies = first.latencies
    clusters = [Cluster(first.channels[ch], float(latencies[a]), float(latencies[b]), b - a + 1, mass,
                        p_of(b - a + 1)) for ch, a, b, mass in found]
    clusters.sort(key=lambda c: (-c.size, -c.mass))
    statistic = clusters[0].size if clusters else 0
    p_value = clusters[0].p_value if clusters else 1.0
    logger.debug(f"Teste de clusters: limiar={threshold:.3g}, {len(clusters)} clusters, maior={statistic}, p={p_value:.4f}")
    return ClusterResult(clusters, threshold, statistic, p_value, null_len)


def bonferroni(p_values: Sequence[float], m: int, alpha: float = ALPHA) -> list[bool]:
    """Significativo se p < alpha / m."""
    if m < 1:
        raise ParameterError(f"m deve ser >= 1 (recebido {m}).")
    return [p < alpha / m for p in p_values]
