"""Matrizes de atraso, regressão ridge, TRFs (modelos forward) e modelos backward."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from core.features import FeatureKind, FeatureSignal
from core.signals import ANALYSIS_FS, MultiSignal, Signal
from utils.errors import (DegenerateCorrelationError, DegenerateSignalError, LengthError,
                          ParameterError, SingularityError)

logger = logging.getLogger(__name__)


class SpeakerRole(str, Enum):
    ATTENDED = "attended"
    IGNORED = "ignored"
    DIFFERENCE = "difference"
    NULL = "null"


@dataclass(frozen=True)
class LagSpec:
    lag_min: int
    lag_max: int
    fs: float = ANALYSIS_FS

    def __post_init__(self):
        if int(self.lag_min) != self.lag_min or int(self.lag_max) != self.lag_max:
            raise ParameterError("Atrasos devem ser inteiros (amostras).")
        if self.lag_min >= self.lag_max:
            raise ParameterError(f"lag_min ({self.lag_min}) deve ser menor que lag_max ({self.lag_max}).")
        if not self.fs > 0:
            raise ParameterError("fs deve ser positivo.")

    @classmethod
    def from_seconds(cls, tmin: float, tmax: float, fs: float = ANALYSIS_FS) -> "LagSpec":
        return cls(int(round(tmin * fs)), int(round(tmax * fs)), fs)

    @property
    def taps(self) -> int:
        return self.lag_max - self.lag_min

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.lag_min, self.lag_max)

    @property
    def latencies(self) -> np.ndarray:
        return self.lags / self.fs


TRF_LAGS = LagSpec(-64, 96)
BACKWARD_LAGS = LagSpec(0, 64)


@dataclass(frozen=True)
class RidgeSolution:
    weights: np.ndarray
    lam: float


@dataclass(frozen=True)
class Trf:
    coefficients: np.ndarray
    lags: LagSpec
    channels: tuple[str, ...]
    kind: FeatureKind
    role: SpeakerRole

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=np.float64)
        if coefficients.shape != (len(self.channels), self.lags.taps):
            raise ParameterError(
                f"Coeficientes {coefficients.shape} incompatíveis com {len(self.channels)} canais x {self.lags.taps} taps.")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def latencies(self) -> np.ndarray:
        return self.lags.latencies

    def same_axes(self, other: "Trf") -> bool:
        return self.lags == other.lags and self.channels == other.channels


@dataclass(frozen=True)
class BackwardModel:
    weights: np.ndarray
    lam: float
    lags: LagSpec
    channels: tuple[str, ...]
    kind: FeatureKind
    role: SpeakerRole = SpeakerRole.ATTENDED

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64).ravel()
        if weights.size != len(self.channels) * self.lags.taps:
            raise ParameterError(
                f"{weights.size} pesos para {len(self.channels)} canais x {self.lags.taps} taps.")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "channels", tuple(self.channels))

    def reconstruct(self, eeg: MultiSignal) -> FeatureSignal:
        return reconstruct(self, eeg)


def _as_rows(signals) -> np.ndarray:
    if isinstance(signals, MultiSignal):
        return signals.data
    if isinstance(signals, (Signal, FeatureSignal)):
        return signals.samples[np.newaxis, :]
    arr = np.asarray(signals, dtype=np.float64)
    return arr[np.newaxis, :] if arr.ndim == 1 else arr


def build_lag_matrix(signals, lags: LagSpec, reverse: bool = False) -> np.ndarray:
    """Matriz T x (canais x taps), ordem canal-major e atraso crescente.

    A linha t contém x[t - lag]; com `reverse`, x[t + lag] (EEG posterior
    ao estímulo, usado pelos modelos backward). Fora do intervalo vale zero.
    """
    x = _as_rows(signals)
    n_channels, n = x.shape
    if lags.taps >= n:
        raise LengthError(f"{lags.taps} taps exigem mais que {n} amostras.")
    out = np.zeros((n, n_channels * lags.taps))
    for j, lag in enumerate(lags.lags):
        shift = -lag if reverse else lag
        cols = np.arange(n_channels) * lags.taps + j
        if shift >= 0:
            out[shift:, cols] = x[:, :n - shift].T
        else:
            out[:n + shift, cols] = x[:, -shift:].T
    return out


def ridge_from_gram(gram: np.ndarray, cross: np.ndarray, lambdas) -> list[np.ndarray]:
    """Soluções (G + λI)^-1 c para vários λ a partir de uma única decomposição de G."""
    eigvals, eigvecs = linalg.eigh(gram)
    projected = eigvecs.T @ cross
    top = max(float(eigvals[-1]), 0.0)
    solutions = []
    for lam in np.atleast_1d(lambdas):
        lam = float(lam)
        if lam < 0:
            raise ParameterError(f"λ deve ser >= 0 (recebido {lam}).")
        denom = eigvals + lam
        if lam == 0 and (top == 0 or eigvals[0] <= 1e-12 * top):
            raise SingularityError("XᵀX é singular e λ = 0.")
        scaled = projected / (denom[:, np.newaxis] if projected.ndim == 2 else denom)
        solutions.append(eigvecs @ scaled)
    return solutions


def ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> RidgeSolution:
    """w = (XᵀX + λI)^-1 Xᵀy por autodecomposição de XᵀX."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ParameterError(f"X tem {X.shape[0]} linhas, y tem {y.shape[0]}.")
    weights = ridge_from_gram(X.T @ X, X.T @ y, [lam])[0]
    return RidgeSolution(weights, float(lam))


def mean_eigen_lambda(X: np.ndarray) -> float:
    """Autovalor médio da autocovariância enviesada: trace(XᵀX / T) / colunas."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ParameterError("Matriz de projeto vazia.")
    return float(np.sum(X ** 2) / (X.shape[0] * X.shape[1]))


def _check_feature(feature: FeatureSignal) -> None:
    if np.ptp(feature.samples) == 0:
        raise DegenerateSignalError(f"Feature {feature.kind.value} constante.")


def trf_from_gram(gram: np.ndarray, cross: np.ndarray, n_rows: int, lags: LagSpec,
                  channels, kind: FeatureKind, role: SpeakerRole) -> Trf:
    """TRF a partir de somas XᵀX e XᵀY; λ = autovalor médio de XᵀX / n_rows."""
    lam = float(np.trace(gram) / (n_rows * gram.shape[0]))
    weights = ridge_from_gram(gram, cross, [lam])[0]
    return Trf(weights.T, lags, tuple(channels), kind, role)


def fit_trf(feature: FeatureSignal, eeg: MultiSignal, lags: LagSpec = TRF_LAGS,
            role: SpeakerRole = SpeakerRole.ATTENDED) -> Trf:
    """Um ridge por canal de EEG prevendo-o a partir da feature atrasada."""
    if len(feature) != len(eeg):
        raise ParameterError(f"Feature ({len(feature)}) e EEG ({len(eeg)}) com comprimentos diferentes.")
    if feature.fs != eeg.fs:
        raise ParameterError(f"Taxas diferentes: {feature.fs} Hz vs {eeg.fs} Hz.")
    _check_feature(feature)
    X = build_lag_matrix(feature, lags)
    return trf_from_gram(X.T @ X, X.T @ eeg.data.T, X.shape[0], lags, eeg.channels, feature.kind, role)


def fit_backward(eeg: MultiSignal, feature: FeatureSignal, lags: LagSpec = BACKWARD_LAGS,
                 lam: float = 1.0, role: SpeakerRole = SpeakerRole.ATTENDED) -> BackwardModel:
    """Ridge sobre o EEG atrasado (0..1 s após o estímulo) prevendo a feature."""
    if lags.lag_min < 0:
        raise ParameterError("Modelos backward exigem atrasos não negativos.")
    if len(feature) != len(eeg):
        raise ParameterError(f"Feature ({len(feature)}) e EEG ({len(eeg)}) com comprimentos diferentes.")
    X = build_lag_matrix(eeg, lags, reverse=True)
    solution = ridge_solve(X, feature.samples, lam)
    return BackwardModel(solution.weights, solution.lam, lags, eeg.channels, feature.kind, role)


def reconstruct(model: BackwardModel, eeg: MultiSignal) -> FeatureSignal:
    if eeg.channels != model.channels:
        raise ParameterError(f"Canais do EEG {eeg.channels} diferem do modelo {model.channels}.")
    X = build_lag_matrix(eeg, model.lags, reverse=True)
    return FeatureSignal(Signal(X @ model.weights, eeg.fs), model.kind, standardized=False)


def pearson(a, b) -> float:
    """Correlação de Pearson amostral."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ParameterError(f"Vetores com tamanhos diferentes: {a.size} e {b.size}.")
    if a.size < 2:
        raise ParameterError("Pearson exige pelo menos 2 amostras.")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.dot(da, da))
    nb = np.sqrt(np.dot(db, db))
    if na == 0 or nb == 0:
        raise DegenerateCorrelationError("Entrada constante: correlação indefinida.")
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))


def safe_pearson(a, b) -> float:
    """Pearson com a política de segmento degenerado: ρ = 0."""
    try:
        return pearson(a, b)
    except DegenerateCorrelationError:
        return 0.0
