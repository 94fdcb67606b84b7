"""Validação cruzada aninhada, segmentação, marcadores de atenção, testes t e nível de acaso."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg, stats

from core.cca import (EEG_LAGS, FEATURE_LAGS, SHRINKAGE_GRID, CcaModel, LdaClassifier, TrialDesign,
                      correlations_from_design, difference_vectors, fit_cca_trials, fit_lda,
                      train_cca_decoder, trial_design)
from core.features import FeatureKind
from core.linear import (BACKWARD_LAGS, BackwardModel, LagSpec, SpeakerRole, build_lag_matrix,
                         pearson, ridge_from_gram, safe_pearson)
from database.models import TrialBundle
from utils.errors import (DegenerateClassifierError, DegenerateCorrelationError, DegenerateTestError, ParameterError,
                          SingularityError, TuningError)
from utils.seeding import as_seed_sequence

logger = logging.getLogger(__name__)

# --- Configurações ---
INNER_FOLDS = 5
ALPHA = 0.05
DEFAULT_HOP_S = 1.0
MARKER_SEGMENT_S = 5.0


def lambda_grid() -> np.ndarray:
    """19 valores log-uniformes de 1e-9 a 1e9."""
    return 10.0 ** np.arange(-9, 10, dtype=np.float64)


# --- Plano de validação cruzada ---

@dataclass(frozen=True)
class Piece:
    """Trecho [start, stop) do ensaio na posição `trial`."""
    trial: int
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class NestedCvPlan:
    n_trials: int
    inner: int
    seed: int | None
    # ordem (sorteada) dos ensaios de treino, concatenados no tempo, por dobra externa
    orders: tuple[tuple[int, ...], ...]

    @property
    def n_outer(self) -> int:
        return self.n_trials

    def test_trial(self, fold: int) -> int:
        return fold

    def training(self, fold: int) -> tuple[int, ...]:
        return self.orders[fold]

    def inner_folds(self, fold: int, lengths: Sequence[int]) -> list[list[Piece]]:
        """Divide o tempo concatenado dos ensaios de treino em `inner` partes iguais (±1 amostra)."""
        if len(lengths) != self.n_trials:
            raise ParameterError(f"Plano para {self.n_trials} ensaios, recebidos {len(lengths)} comprimentos.")
        order = self.orders[fold]
        sizes = [int(lengths[t]) for t in order]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        total = int(offsets[-1])
        if total < self.inner:
            raise ParameterError("Dados de treino menores que o número de dobras internas.")
        bounds = [0] + [int(b) for b in np.cumsum([len(c) for c in np.array_split(np.arange(total), self.inner)])]
        folds = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            pieces = []
            for pos, trial in enumerate(order):
                a, b = max(lo, offsets[pos]), min(hi, offsets[pos + 1])
                if b > a:
                    pieces.append(Piece(trial, int(a - offsets[pos]), int(b - offsets[pos])))
            folds.append(pieces)
        return folds


def make_nested_cv(n_trials: int = 16, inner: int = INNER_FOLDS, seed: int = 0) -> NestedCvPlan:
    if n_trials < 2:
        raise ParameterError(f"n_trials={n_trials}; mínimo 2.")
    if inner < 2:
        raise ParameterError(f"inner={inner}; mínimo 2.")
    rng = np.random.default_rng(as_seed_sequence(seed))
    orders = []
    for test in range(n_trials):
        rest = np.array([t for t in range(n_trials) if t != test])
        orders.append(tuple(int(t) for t in rng.permutation(rest)))
    return NestedCvPlan(n_trials, inner, seed if isinstance(seed, int) else None, tuple(orders))


def _complement(folds: list[list[Piece]], k: int, order: Sequence[int], lengths: Sequence[int]) -> list[Piece]:
    """Trechos de treino da dobra interna k (tudo menos a dobra k)."""
    held = {}
    for p in folds[k]:
        held.setdefault(p.trial, []).append(p)
    pieces = []
    for t in order:
        cursor = 0
        for p in sorted(held.get(t, []), key=lambda q: q.start):
            if p.start > cursor:
                pieces.append(Piece(t, cursor, p.start))
            cursor = p.stop
        if cursor < lengths[t]:
            pieces.append(Piece(t, cursor, int(lengths[t])))
    return pieces


# --- Modelos backward ---

@dataclass(frozen=True)
class TunedModel:
    test_trial: int
    model: object
    inner_scores: np.ndarray = field(repr=False, default=None)
    selection: dict = field(default_factory=dict)


def select_lambda(lambdas: Sequence[float], scores: np.ndarray) -> float:
    """λ com maior escore médio; primeira ocorrência em empates."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0 or np.all(np.isnan(scores)):
        raise TuningError("Todas as correlações internas são degeneradas.")
    return float(np.asarray(lambdas)[int(np.nanargmax(scores))])


class _Designs:
    """Matrizes atrasadas por ensaio e Grams de ensaios inteiros em cache."""

    def __init__(self, trials: Sequence[TrialBundle], kind: FeatureKind, role: SpeakerRole, lags: LagSpec):
        self.X = [build_lag_matrix(t.eeg, lags, reverse=True) for t in trials]
        self.y = [t.feature(role, kind).samples for t in trials]
        self.lengths = [x.shape[0] for x in self.X]
        self._gram = [x.T @ x for x in self.X]
        self._cross = [x.T @ y for x, y in zip(self.X, self.y)]

    def gram(self, pieces: Sequence[Piece]) -> tuple[np.ndarray, np.ndarray]:
        g = np.zeros_like(self._gram[0])
        c = np.zeros_like(self._cross[0])
        for p in pieces:
            if p.start == 0 and p.stop == self.lengths[p.trial]:
                g += self._gram[p.trial]
                c += self._cross[p.trial]
            else:
                x = self.X[p.trial][p.start:p.stop]
                g += x.T @ x
                c += x.T @ self.y[p.trial][p.start:p.stop]
        return g, c

    def rows(self, pieces: Sequence[Piece]) -> tuple[np.ndarray, np.ndarray]:
        return (np.concatenate([self.X[p.trial][p.start:p.stop] for p in pieces]),
                np.concatenate([self.y[p.trial][p.start:p.stop] for p in pieces]))


def _inner_scores(designs: _Designs, plan: NestedCvPlan, fold: int, lambdas: np.ndarray) -> np.ndarray:
    order = plan.training(fold)
    folds = plan.inner_folds(fold, designs.lengths)
    total_g, total_c = designs.gram([Piece(t, 0, designs.lengths[t]) for t in order])
    scores = np.full((len(folds), lambdas.size), np.nan)
    for k, held in enumerate(folds):
        g_val, c_val = designs.gram(held)
        X_val, y_val = designs.rows(held)
        try:
            solutions = ridge_from_gram(total_g - g_val, total_c - c_val, lambdas)
        except SingularityError:
            continue
        for j, w in enumerate(solutions):
            try:
                scores[k, j] = pearson(X_val @ w, y_val)
            except DegenerateCorrelationError:
                pass
    if np.isnan(scores).all():
        return np.full(lambdas.size, np.nan)
    # correlação degenerada numa dobra conta como 0
    return np.nan_to_num(scores, nan=0.0).mean(axis=0)


def tune_backward(plan: NestedCvPlan, trials: Sequence[TrialBundle], kind: FeatureKind,
                  role: SpeakerRole = SpeakerRole.ATTENDED, lambdas=None,
                  lags: LagSpec = BACKWARD_LAGS) -> list[TunedModel]:
    """Um modelo backward por dobra externa, com λ escolhido na validação interna."""
    if plan.n_trials != len(trials):
        raise ParameterError(f"Plano cobre {plan.n_trials} ensaios; recebidos {len(trials)}.")
    lambdas = lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    designs = _Designs(trials, kind, role, lags)
    channels = trials[0].eeg.channels
    tuned = []
    for fold in range(plan.n_outer):
        scores = _inner_scores(designs, plan, fold, lambdas)
        lam = select_lambda(lambdas, scores)
        g, c = designs.gram([Piece(t, 0, designs.lengths[t]) for t in plan.training(fold)])
        weights = ridge_from_gram(g, c, [lam])[0]
        model = BackwardModel(weights, lam, lags, channels, kind, role)
        tuned.append(TunedModel(plan.test_trial(fold), model, scores, {"lambda": lam}))
        logger.debug(f"Backward {kind.value}/{role.value} dobra {fold + 1}: λ={lam:g}")
    return tuned


# --- Segmentação e marcadores ---

@dataclass(frozen=True)
class Segment:
    start: int
    stop: int
    fs: float

    @property
    def start_s(self) -> float:
        return self.start / self.fs

    @property
    def length_s(self) -> float:
        return (self.stop - self.start) / self.fs


def segment_starts(n_samples: int, fs: float, length: float, hop: float = DEFAULT_HOP_S) -> tuple[np.ndarray, int]:
    if not length > 0 or not hop > 0:
        raise ParameterError("Comprimento e passo do segmento devem ser positivos.")
    seg = int(round(length * fs))
    step = int(round(hop * fs))
    if seg < 1 or step < 1:
        raise ParameterError(f"Segmento de {length} s / passo de {hop} s abaixo de uma amostra a {fs} Hz.")
    if seg > n_samples:
        return np.zeros(0, dtype=np.int64), seg
    return np.arange(0, n_samples - seg + 1, step, dtype=np.int64), seg


def segment_trial(trial: TrialBundle, length: float, hop: float = DEFAULT_HOP_S) -> list[Segment]:
    """Segmentos completos em 0, hop, 2·hop, ...; lista vazia se `length` excede o ensaio."""
    starts, seg = segment_starts(trial.n_samples, trial.fs, length, hop)
    return [Segment(int(s), int(s) + seg, trial.fs) for s in starts]


@dataclass(frozen=True)
class AttentionMarker:
    rho_attended: float
    rho_ignored: float
    delta: float
    start: float
    length: float
    partner: int | None = None

    @classmethod
    def build(cls, rho_attended: float, rho_ignored: float, start: float, length: float,
              partner: int | None = None) -> "AttentionMarker":
        return cls(float(rho_attended), float(rho_ignored), float(rho_attended - rho_ignored), start, length, partner)

    @property
    def correct(self) -> bool:
        return self.delta > 0


def _starts_and_length(segments: Sequence[Segment]) -> tuple[np.ndarray, int]:
    sizes = {s.stop - s.start for s in segments}
    if len(sizes) != 1:
        raise ParameterError("Segmentos devem ter todos o mesmo comprimento.")
    return np.array([s.start for s in segments], dtype=np.int64), sizes.pop()


def segment_correlations(x: np.ndarray, y: np.ndarray, x_starts: np.ndarray, seg: int,
                         y_starts: np.ndarray | None = None) -> np.ndarray:
    """Pearson por segmento; segmentos constantes valem 0."""
    y_starts = x_starts if y_starts is None else y_starts
    if seg < 2:
        return np.zeros(x_starts.size)
    a = sliding_window_view(np.asarray(x, dtype=np.float64), seg)[x_starts]
    b = sliding_window_view(np.asarray(y, dtype=np.float64), seg)[y_starts]
    da = a - a.mean(axis=1, keepdims=True)
    db = b - b.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.sum(da * da, axis=1) * np.sum(db * db, axis=1))
    out = np.zeros(x_starts.size)
    ok = denom > 0
    out[ok] = np.sum(da * db, axis=1)[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def markers_from_reconstruction(reconstruction: np.ndarray, attended: np.ndarray, ignored: np.ndarray,
                                segments: Sequence[Segment], partners: np.ndarray | None = None) -> list[AttentionMarker]:
    if not segments:
        return []
    starts, seg = _starts_and_length(segments)
    feature_starts = starts if partners is None else starts[partners]
    rho_att = segment_correlations(reconstruction, attended, starts, seg, feature_starts)
    rho_ign = segment_correlations(reconstruction, ignored, starts, seg, feature_starts)
    fs = segments[0].fs
    return [AttentionMarker.build(ra, ri, s / fs, seg / fs, None if partners is None else int(partners[i]))
            for i, (ra, ri, s) in enumerate(zip(rho_att, rho_ign, starts))]


def _reconstruction(model, trial: TrialBundle) -> np.ndarray:
    return model.reconstruct(trial.eeg).samples


def markers_backward(model, trial: TrialBundle, segments: Sequence[Segment]) -> list[AttentionMarker]:
    """Reconstrói o ensaio uma vez e correlaciona por segmento com as duas features."""
    kind = model.kind
    return markers_from_reconstruction(_reconstruction(model, trial),
                                       trial.feature(SpeakerRole.ATTENDED, kind).samples,
                                       trial.feature(SpeakerRole.IGNORED, kind).samples, segments)


def draw_partners(n_segments: int, rng: np.random.Generator) -> np.ndarray:
    """Para cada segmento, outro segmento sorteado uniformemente (nunca ele mesmo)."""
    if n_segments < 2:
        raise ParameterError("Marcadores nulos exigem pelo menos 2 segmentos.")
    draws = rng.integers(0, n_segments - 1, size=n_segments)
    return draws + (draws >= np.arange(n_segments))


def null_markers(model, trial: TrialBundle, segments: Sequence[Segment], seed=0,
                 reconstruction: np.ndarray | None = None) -> list[AttentionMarker]:
    """Mesma reconstrução, correlacionada com as features de um segmento diferente."""
    partners = draw_partners(len(segments), np.random.default_rng(as_seed_sequence(seed)))
    recon = _reconstruction(model, trial) if reconstruction is None else reconstruction
    kind = model.kind
    return markers_from_reconstruction(recon, trial.feature(SpeakerRole.ATTENDED, kind).samples,
                                       trial.feature(SpeakerRole.IGNORED, kind).samples, segments, partners)


# --- Estatística ---

def ttest(kind: str, tail: str, a, b) -> tuple[float, float]:
    """t de Student (não pareado com variância conjunta, ou pareado); unicaudal testa a > b."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if tail not in ("single", "double"):
        raise ParameterError(f"Cauda desconhecida: '{tail}'")
    alternative = "greater" if tail == "single" else "two-sided"
    if a.size < 2 or b.size < 2:
        raise ParameterError("Cada grupo precisa de pelo menos 2 amostras.")
    if kind == "unpaired":
        if np.ptp(a) == 0 and np.ptp(b) == 0:
            raise DegenerateTestError("Variância nula nos dois grupos.")
        result = stats.ttest_ind(a, b, equal_var=True, alternative=alternative)
    elif kind == "paired":
        if a.size != b.size:
            raise ParameterError(f"Teste pareado com tamanhos diferentes: {a.size} e {b.size}.")
        if np.ptp(a - b) == 0:
            raise DegenerateTestError("Diferenças pareadas com variância nula.")
        result = stats.ttest_rel(a, b, alternative=alternative)
    else:
        raise ParameterError(f"Tipo de teste desconhecido: '{kind}'")
    return float(result.statistic), float(result.pvalue)


def chance_levels(n_max: int, alpha: float = ALPHA) -> np.ndarray:
    """Nível de chance para n = 1..n_max segmentos.

    Para cada n, menor k/n com CDF binomial(n, 0.5) >= 1 − alpha, com mínimo
    acumulado em n.
    """
    if n_max < 1:
        raise ParameterError("n_segments deve ser >= 1.")
    n = np.arange(1, int(n_max) + 1)
    k = stats.binom.ppf(1.0 - alpha - 1e-12, n, 0.5)
    return np.minimum.accumulate(np.minimum(k, n) / n)


def chance_level(n_segments: int, alpha: float = ALPHA) -> float:
    return float(chance_levels(n_segments, alpha)[-1])


def single_tailed_threshold(df: int, alpha: float) -> float:
    return float(stats.t.ppf(1.0 - alpha, df))


# --- Correlações por ensaio (modelos backward) ---

@dataclass(frozen=True)
class TrialCorrelation:
    trial: int
    role: SpeakerRole
    stream: SpeakerRole
    rho: float


def trial_correlations(tuned: Sequence[TunedModel], trials: Sequence[TrialBundle]) -> list[TrialCorrelation]:
    """Correlação de cada ensaio retido com os fluxos atendido e ignorado."""
    out = []
    for t in tuned:
        trial = trials[t.test_trial]
        recon = _reconstruction(t.model, trial)
        for stream in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED):
            rho = safe_pearson(recon, trial.feature(stream, t.model.kind).samples)
            out.append(TrialCorrelation(trial.index, t.model.role, stream, rho))
    return out


def null_trial_correlations(tuned: Sequence[TunedModel], trials: Sequence[TrialBundle],
                            stream: SpeakerRole = SpeakerRole.ATTENDED) -> list[float]:
    """Reconstrução de um ensaio de teste contra as features de outros ensaios."""
    out = []
    for t in tuned:
        recon = _reconstruction(t.model, trials[t.test_trial])
        for j, other in enumerate(trials):
            if j == t.test_trial:
                continue
            feat = other.feature(stream, t.model.kind).samples
            n = min(recon.size, feat.size)
            out.append(safe_pearson(recon[:n], feat[:n]))
    return out


def backward_model_statistics(correlations: dict[tuple[str, str], Sequence[float]],
                              nulls: dict[tuple[str, str], Sequence[float]],
                              alpha: float = ALPHA) -> dict:
    """Cada grupo (modelo, fluxo) contra o nulo, com Bonferroni sobre os grupos; mais o
    teste pareado atendido > ignorado para os modelos do locutor atendido."""
    m = len(correlations)
    groups = {}
    for key, values in correlations.items():
        t, p = ttest("unpaired", "single", values, nulls[key])
        groups["/".join(key)] = {"t": t, "p": p, "significant": bool(p < alpha / m), "mean": float(np.mean(values))}
    out = {"groups": groups, "bonferroni_alpha": alpha / max(m, 1)}
    att = SpeakerRole.ATTENDED.value
    ign = SpeakerRole.IGNORED.value
    if (att, att) in correlations and (att, ign) in correlations:
        t, p = ttest("paired", "single", correlations[(att, att)], correlations[(att, ign)])
        out["attended_vs_ignored"] = {"t": t, "p": p}
    return out


def marker_significance(markers: dict[str, Sequence[float]], nulls: dict[str, Sequence[float]],
                        alpha: float = ALPHA) -> dict:
    """t unicaudal não pareado de Δρ contra o nulo por participante, Bonferroni sobre participantes."""
    m = len(markers)
    threshold = alpha / max(m, 1)
    per = {}
    for name, deltas in markers.items():
        try:
            t, p = ttest("unpaired", "single", deltas, nulls[name])
        except (DegenerateTestError, ParameterError):
            t, p = 0.0, 1.0
        per[name] = {"t": t, "p": p, "significant": bool(p < threshold),
                     "df": len(deltas) + len(nulls[name]) - 2}
    return {"participants": per, "bonferroni_alpha": threshold,
            "n_significant": sum(v["significant"] for v in per.values())}


def compare_algorithms(accuracy: dict[str, dict[float, dict[str, float]]],
                       lengths: Sequence[float] = (5.0, 30.0)) -> list[dict]:
    """t pareado unicaudal entre pares de decodificadores ao longo dos participantes.

    `accuracy[decodificador][comprimento][participante]`. O teste é feito na
    direção em que a média do primeiro é maior.
    """
    rows = []
    for length in lengths:
        for a, b in combinations(sorted(accuracy), 2):
            acc_a, acc_b = accuracy[a].get(length), accuracy[b].get(length)
            if not acc_a or not acc_b:
                continue
            names = sorted(set(acc_a) & set(acc_b))
            x = np.array([acc_a[n] for n in names])
            y = np.array([acc_b[n] for n in names])
            if x.mean() < y.mean():
                (a, x), (b, y) = (b, y), (a, x)
            try:
                t, p = ttest("paired", "single", x, y)
            except (DegenerateTestError, ParameterError):
                t, p = float("nan"), float("nan")
            rows.append({"length": length, "better": a, "worse": b, "t": t, "p": p,
                         "mean_better": float(x.mean()), "mean_worse": float(y.mean())})
    return rows


# --- CNN e CCA na validação cruzada ---

def _chunks(trials: Sequence[TrialBundle], pieces: Sequence[Piece], kind: FeatureKind,
            role: SpeakerRole = SpeakerRole.ATTENDED):
    return [(trials[p.trial].eeg.data[:, p.start:p.stop],
             trials[p.trial].feature(role, kind).samples[p.start:p.stop]) for p in pieces]


def tune_cnn(plan: NestedCvPlan, trials: Sequence[TrialBundle], kind: FeatureKind, budget=None,
             seed=0, folds: Sequence[int] | None = None) -> list[TunedModel]:
    """Grade (kernel, blocos) escolhida pela correlação média nas dobras internas.

    Cada dobra interna é, por vez, a validação (também usada para parada
    antecipada); o treino são as demais. `budget.inner_folds` limita quantas
    dobras entram na média. Do ponto vencedor, o modelo da dobra com maior
    correlação de validação é o submetido à avaliação.
    """
    from core.cnn import CnnHyper, train_cnn
    from utils.config import CnnBudget

    budget = budget or CnnBudget()
    lengths = [t.n_samples for t in trials]
    channels = trials[0].eeg.channels
    fold_seeds = as_seed_sequence(seed).spawn(plan.n_outer)
    tuned = []
    for fold in (range(plan.n_outer) if folds is None else folds):
        inner = plan.inner_folds(fold, lengths)
        used = range(len(inner) if budget.inner_folds is None else min(budget.inner_folds, len(inner)))
        splits = [(_chunks(trials, _complement(inner, k, plan.training(fold), lengths), kind),
                   _chunks(trials, inner[k], kind)) for k in used]
        best, best_mean, scores = None, -np.inf, []
        for (kernel, blocks), s in zip(budget.grid, fold_seeds[fold].spawn(len(budget.grid))):
            decoders = [train_cnn(training, validation, CnnHyper(kernel, blocks), kind, channels, budget, ks)
                        for (training, validation), ks in zip(splits, s.spawn(len(splits)))]
            rhos = np.array([d.validation_rho for d in decoders])
            mean = float(np.nanmean(rhos)) if np.any(np.isfinite(rhos)) else -np.inf
            scores.append(mean)
            if best is None or mean > best_mean:
                best_mean = mean
                best = max(decoders, key=lambda d: d.validation_rho if np.isfinite(d.validation_rho) else -np.inf)
        tuned.append(TunedModel(plan.test_trial(fold), best, np.array(scores),
                                {"kernel": best.hyper.kernel, "blocks": best.hyper.blocks}))
        logger.debug(f"CNN {kind.value} dobra {fold + 1}: k={best.hyper.kernel} b={best.hyper.blocks} "
                     f"ρ_val={best.validation_rho:.3f}")
    return tuned


def _slice(design: TrialDesign, piece: Piece) -> TrialDesign:
    sl = slice(piece.start, piece.stop)
    return TrialDesign(design.X[sl], design.attended[sl], design.ignored[sl])


def cca_designs(trials: Sequence[TrialBundle], kind: FeatureKind, eeg_lags: LagSpec = EEG_LAGS,
                feature_lags: LagSpec = FEATURE_LAGS) -> list[TrialDesign]:
    return [trial_design(t, kind, eeg_lags, feature_lags) for t in trials]


def tune_cca(plan: NestedCvPlan, trials: Sequence[TrialBundle], kind: FeatureKind,
             shrinkage_grid: Sequence[float] = SHRINKAGE_GRID, lda_segment_s: float = 5.0,
             eeg_lags: LagSpec = EEG_LAGS, feature_lags: LagSpec = FEATURE_LAGS) -> list[TunedModel]:
    """(γ, n_comp) pela acurácia LDA média nas dobras internas; modelo final em todo o treino."""
    designs = cca_designs(trials, kind, eeg_lags, feature_lags)
    lengths = [d.X.shape[0] for d in designs]
    fs = trials[0].fs
    segment = int(round(lda_segment_s * fs))
    meta = {"eeg_lags": eeg_lags, "feature_lags": feature_lags, "channels": trials[0].eeg.channels, "kind": kind}
    tuned = []
    for fold in range(plan.n_outer):
        order = plan.training(fold)
        inner = plan.inner_folds(fold, lengths)
        n_max = min(designs[0].X.shape[1], designs[0].attended.shape[1])
        scores = np.full((len(shrinkage_grid), n_max), np.nan)
        for g, gamma in enumerate(shrinkage_grid):
            acc = np.zeros((len(inner), n_max))
            valid = np.zeros(len(inner), dtype=bool)
            for k in range(len(inner)):
                train = [_slice(designs[p.trial], p) for p in _complement(inner, k, order, lengths)]
                held = [_slice(designs[p.trial], p) for p in inner[k]]
                try:
                    model = fit_cca_trials(train, gamma, **meta)
                except SingularityError:
                    continue
                d_train = difference_vectors(model, train, segment)
                d_val = difference_vectors(model, held, segment)
                if d_train.shape[0] < 2 or d_val.shape[0] == 0:
                    continue
                for n in range(1, model.n_comp + 1):
                    try:
                        lda = fit_lda(d_train[:, :n], -d_train[:, :n])
                    except (DegenerateClassifierError, linalg.LinAlgError):
                        continue
                    acc[k, n - 1] = float(np.mean(lda.predict(d_val[:, :n])))
                valid[k] = True
            if valid.any():
                scores[g] = acc[valid].mean(axis=0)
        if np.all(np.isnan(scores)):
            raise TuningError(f"CCA sem configuração válida na dobra {fold + 1}.")
        g_best, n_best = np.unravel_index(int(np.nanargmax(scores)), scores.shape)
        gamma, n_comp = float(shrinkage_grid[g_best]), int(n_best) + 1
        model, lda = train_cca_decoder([designs[t] for t in order], gamma, n_comp, segment, **meta)
        tuned.append(TunedModel(plan.test_trial(fold), (model, lda), scores,
                                {"shrinkage": gamma, "n_comp": n_comp}))
        logger.debug(f"CCA {kind.value} dobra {fold + 1}: γ={gamma:g} n_comp={n_comp}")
    return tuned


def cca_segment_margins(model: CcaModel, lda: LdaClassifier, design: TrialDesign,
                        segments: Sequence[Segment], attended_first: bool = True) -> np.ndarray:
    """Margem LDA por segmento; candidato A é o fluxo atendido se `attended_first`."""
    first, second = (design.attended, design.ignored) if attended_first else (design.ignored, design.attended)
    margins = np.empty(len(segments))
    for i, s in enumerate(segments):
        sl = slice(s.start, s.stop)
        d = (correlations_from_design(model, design.X[sl], first[sl])
             - correlations_from_design(model, design.X[sl], second[sl]))
        margins[i] = lda.margin(d)
    return margins
