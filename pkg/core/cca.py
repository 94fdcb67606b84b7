"""CCA entre EEG e feature com atrasos, e o classificador LDA sobre diferenças de correlação."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import linalg

from core.features import FeatureKind, FeatureSignal
from core.linear import LagSpec, SpeakerRole, build_lag_matrix
from core.signals import MultiSignal
from utils.errors import DegenerateClassifierError, ParameterError, SingularityError

if TYPE_CHECKING:
    from database.models import TrialBundle

logger = logging.getLogger(__name__)

# --- Configurações ---
EEG_LAGS = LagSpec(0, 64)
FEATURE_LAGS = LagSpec(0, 16)
SHRINKAGE_GRID = (0.0, 1e-4, 1e-2)
LDA_SEGMENT_S = 5.0
LDA_SHRINKAGE = 1e-3
_EIG_TOL = 1e-12


@dataclass(frozen=True)
class CcaModel:
    wx: np.ndarray
    wy: np.ndarray
    rho: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    shrinkage: float = 0.0
    eeg_lags: LagSpec = EEG_LAGS
    feature_lags: LagSpec = FEATURE_LAGS
    channels: tuple[str, ...] = ()
    kind: FeatureKind | None = None

    @property
    def n_comp(self) -> int:
        return int(self.rho.size)

    def truncate(self, n_comp: int) -> "CcaModel":
        if not 1 <= n_comp <= self.n_comp:
            raise ParameterError(f"n_comp={n_comp} fora de [1, {self.n_comp}].")
        return replace(self, wx=self.wx[:, :n_comp], wy=self.wy[:, :n_comp], rho=self.rho[:n_comp])

    def project_eeg(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean_x) @ self.wx

    def project_feature(self, Y: np.ndarray) -> np.ndarray:
        return (np.asarray(Y, dtype=np.float64) - self.mean_y) @ self.wy


@dataclass(frozen=True)
class LdaClassifier:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ParameterError("LDA com pesos não finitos.")

    def margin(self, d) -> np.ndarray | float:
        out = np.asarray(d, dtype=np.float64) @ self.weights + self.bias
        return float(out) if np.ndim(out) == 0 else out

    def predict(self, d) -> np.ndarray:
        """True = classe positiva (candidato A); empate conta como A."""
        return np.asarray(self.margin(d)) >= 0


def _inverse_sqrt(cov: np.ndarray, shrinkage: float, side: str) -> np.ndarray:
    d = cov.shape[0]
    reg = (1.0 - shrinkage) * cov + shrinkage * np.trace(cov) / d * np.eye(d)
    vals, vecs = linalg.eigh(reg)
    top = vals.max() if vals.size else 0.0
    if top <= 0 or vals.min() <= _EIG_TOL * top:
        raise SingularityError(f"Covariância do lado {side} sem posto completo (γ={shrinkage}).")
    return (vecs / np.sqrt(vals)) @ vecs.T


def fit_cca(eeg_lagged: np.ndarray, feature_lagged: np.ndarray, shrinkage: float = 0.0,
            **meta) -> CcaModel:
    """CCA por branqueamento com covariância regularizada e SVD da covariância cruzada."""
    X = np.asarray(eeg_lagged, dtype=np.float64)
    Y = np.asarray(feature_lagged, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise ParameterError(f"Matrizes com {X.shape[0]} e {Y.shape[0]} linhas.")
    if not 0.0 <= shrinkage <= 1.0:
        raise ParameterError(f"shrinkage={shrinkage} fora de [0, 1].")
    n = X.shape[0]
    if n < 2:
        raise ParameterError("CCA exige pelo menos 2 linhas.")
    mean_x, mean_y = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mean_x, Y - mean_y
    kx = _inverse_sqrt(Xc.T @ Xc / (n - 1), shrinkage, "EEG")
    ky = _inverse_sqrt(Yc.T @ Yc / (n - 1), shrinkage, "feature")
    U, s, Vt = linalg.svd(kx @ (Xc.T @ Yc / (n - 1)) @ ky, full_matrices=False)
    k = min(X.shape[1], Y.shape[1])
    return CcaModel(
        wx=kx @ U[:, :k], wy=ky @ Vt[:k].T, rho=np.clip(s[:k], 0.0, 1.0),
        mean_x=mean_x, mean_y=mean_y, shrinkage=float(shrinkage), **meta)


def _column_correlations(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    da = a - a.mean(axis=0)
    db = b - b.mean(axis=0)
    na = np.sqrt(np.sum(da * da, axis=0))
    nb = np.sqrt(np.sum(db * db, axis=0))
    denom = na * nb
    out = np.zeros(a.shape[1])
    ok = denom > 0
    out[ok] = np.sum(da * db, axis=0)[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def correlations_from_design(model: CcaModel, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Correlação por componente entre projeções de linhas já atrasadas; componente constante vale 0."""
    if X.shape[0] != Y.shape[0]:
        raise ParameterError("Segmentos de EEG e feature com tamanhos diferentes.")
    if X.shape[0] < 2:
        return np.zeros(model.n_comp)
    return _column_correlations(model.project_eeg(X), model.project_feature(Y))


def eeg_design(model_or_lags, eeg: MultiSignal) -> np.ndarray:
    lags = model_or_lags.eeg_lags if isinstance(model_or_lags, CcaModel) else model_or_lags
    return build_lag_matrix(eeg, lags, reverse=True)


def feature_design(model_or_lags, feature: FeatureSignal) -> np.ndarray:
    lags = model_or_lags.feature_lags if isinstance(model_or_lags, CcaModel) else model_or_lags
    return build_lag_matrix(feature.samples, lags)


def correlation_vector(model: CcaModel, eeg_segment: MultiSignal, feature_segment: FeatureSignal) -> np.ndarray:
    if len(eeg_segment) != len(feature_segment):
        raise ParameterError("Segmentos de EEG e feature com tamanhos diferentes.")
    return correlations_from_design(model, eeg_design(model, eeg_segment), feature_design(model, feature_segment))


def fit_lda(positive, negative) -> LdaClassifier:
    """LDA de covariância conjunta com encolhimento leve; fronteira no ponto médio."""
    pos = np.atleast_2d(np.asarray(positive, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(negative, dtype=np.float64))
    if pos.shape[0] < 2 or neg.shape[0] < 2:
        raise ParameterError("LDA exige pelo menos 2 amostras por classe.")
    if pos.shape[1] != neg.shape[1]:
        raise ParameterError("Classes com dimensões diferentes.")
    mu_p, mu_n = pos.mean(axis=0), neg.mean(axis=0)
    diff = mu_p - mu_n
    if np.allclose(diff, 0.0, atol=1e-15):
        raise DegenerateClassifierError("Médias das classes idênticas.")
    d = pos.shape[1]
    pooled = ((pos - mu_p).T @ (pos - mu_p) + (neg - mu_n).T @ (neg - mu_n)) / (pos.shape[0] + neg.shape[0] - 2)
    trace = np.trace(pooled)
    pooled = pooled + (LDA_SHRINKAGE * trace / d if trace > 0 else 1.0) * np.eye(d)
    w = linalg.solve(pooled, diff, assume_a="pos")
    return LdaClassifier(w, float(-w @ (mu_p + mu_n) / 2.0))


def decide(lda: LdaClassifier, d: np.ndarray) -> tuple[str, float]:
    margin = float(lda.margin(d))
    return ("A" if margin >= 0 else "B"), margin


def decode_cca(model: CcaModel, lda: LdaClassifier, eeg_segment: MultiSignal,
               feat_a: FeatureSignal, feat_b: FeatureSignal) -> tuple[str, float]:
    d = correlation_vector(model, eeg_segment, feat_a) - correlation_vector(model, eeg_segment, feat_b)
    return decide(lda, d)


def decode_cca_design(model: CcaModel, lda: LdaClassifier, X: np.ndarray,
                      Ya: np.ndarray, Yb: np.ndarray) -> tuple[str, float]:
    d = correlations_from_design(model, X, Ya) - correlations_from_design(model, X, Yb)
    return decide(lda, d)


# --- Treino a partir de ensaios ---

@dataclass(frozen=True)
class TrialDesign:
    """Matrizes atrasadas de um ensaio inteiro; segmentos são fatias de linhas."""
    X: np.ndarray
    attended: np.ndarray
    ignored: np.ndarray


def trial_design(trial: "TrialBundle", kind: FeatureKind, eeg_lags: LagSpec = EEG_LAGS,
                 feature_lags: LagSpec = FEATURE_LAGS) -> TrialDesign:
    return TrialDesign(
        build_lag_matrix(trial.eeg, eeg_lags, reverse=True),
        build_lag_matrix(trial.feature(SpeakerRole.ATTENDED, kind).samples, feature_lags),
        build_lag_matrix(trial.feature(SpeakerRole.IGNORED, kind).samples, feature_lags),
    )


def fit_cca_trials(designs: Sequence[TrialDesign], shrinkage: float, **meta) -> CcaModel:
    """CCA com a feature do locutor atendido, ensaios concatenados."""
    if not designs:
        raise ParameterError("Nenhum ensaio para treinar a CCA.")
    X = np.concatenate([d.X for d in designs])
    Y = np.concatenate([d.attended for d in designs])
    return fit_cca(X, Y, shrinkage, **meta)


def difference_vectors(model: CcaModel, designs: Sequence[TrialDesign], segment: int) -> np.ndarray:
    """Vetores ρ(atendido) − ρ(ignorado) em segmentos não sobrepostos de `segment` amostras."""
    rows = []
    for d in designs:
        for start in range(0, d.X.shape[0] - segment + 1, segment):
            sl = slice(start, start + segment)
            rows.append(correlations_from_design(model, d.X[sl], d.attended[sl])
                        - correlations_from_design(model, d.X[sl], d.ignored[sl]))
    return np.asarray(rows).reshape(-1, model.n_comp)


def train_cca_decoder(designs: Sequence[TrialDesign], shrinkage: float, n_comp: int | None = None,
                      lda_segment: int = int(LDA_SEGMENT_S * 64), **meta) -> tuple[CcaModel, LdaClassifier]:
    """CCA + LDA; as classes do LDA são d e −d dos segmentos de treino."""
    model = fit_cca_trials(designs, shrinkage, **meta)
    if n_comp is not None:
        model = model.truncate(n_comp)
    positive = difference_vectors(model, designs, lda_segment)
    lda = fit_lda(positive, -positive)
    logger.debug(f"CCA γ={shrinkage} n_comp={model.n_comp} ρ1={model.rho[0]:.3f} ({positive.shape[0]} segmentos LDA)")
    return model, lda
