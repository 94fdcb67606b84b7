"""Contêineres de sinal e primitivas de pré-processamento.

Filtro passa-altas FIR (sinc janelado por Hamming), reamostragem racional
polifásica, padronização e alinhamento por correlação cruzada.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from utils.errors import AlignmentError, DegenerateSignalError, LengthError, ParameterError

logger = logging.getLogger(__name__)

# --- Configurações ---
EEG_FS = 256.0
ANALYSIS_FS = 64.0
HIGHPASS_CUTOFF_HZ = 0.5
HIGHPASS_ORDER = 1691
MAX_RATIO_TERM = 1 << 16


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ParameterError(f"Esperado array {ndim}-D, recebido {arr.ndim}-D.")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("Amostras não finitas (NaN/Inf) no sinal.")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    fs: float

    def __post_init__(self):
        if not self.fs > 0:
            raise ParameterError(f"fs deve ser positivo (recebido {self.fs}).")
        object.__setattr__(self, "samples", _frozen_array(self.samples, 1))
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.fs)


@dataclass(frozen=True)
class MultiSignal:
    channels: tuple[str, ...]
    data: np.ndarray
    fs: float

    def __post_init__(self):
        if not self.fs > 0:
            raise ParameterError(f"fs deve ser positivo (recebido {self.fs}).")
        channels = tuple(str(c) for c in self.channels)
        if len(set(channels)) != len(channels):
            raise ParameterError(f"Nomes de canal repetidos: {channels}")
        data = _frozen_array(self.data, 2)
        if data.shape[0] != len(channels):
            raise ParameterError(
                f"{len(channels)} nomes de canal para {data.shape[0]} linhas de dados.")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def channel(self, name: str) -> Signal:
        return Signal(self.data[self.channels.index(name)], self.fs)

    def with_data(self, data) -> "MultiSignal":
        return MultiSignal(self.channels, data, self.fs)


@dataclass(frozen=True)
class FirFilter:
    coefficients: np.ndarray
    cutoff_hz: float
    order: int
    fs: float
    window: str = "hamming"
    kind: str = field(default="highpass")

    def __post_init__(self):
        coefficients = _frozen_array(self.coefficients, 1)
        if coefficients.shape[0] != self.order + 1:
            raise ParameterError(
                f"FIR de ordem {self.order} precisa de {self.order + 1} coeficientes, tem {coefficients.shape[0]}.")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def group_delay(self) -> float:
        return self.order / 2


def design_highpass_sinc(cutoff_hz: float, order: int, fs: float) -> FirFilter:
    """Passa-altas por inversão espectral de um passa-baixas sinc-Hamming.

    Ordem par gera um filtro tipo I (delta central); ordem ímpar gera tipo II,
    com o "passa-tudo" dado pelo sinc de atraso fracionário com a mesma janela.
    O ganho DC é zerado por construção: ambos os ramos somam exatamente 1.
    """
    if order < 2 or int(order) != order:
        raise ParameterError(f"Ordem do FIR deve ser inteira e >= 2 (recebido {order}).")
    if not 0 < cutoff_hz < fs / 2:
        raise ParameterError(f"Corte {cutoff_hz} Hz fora de (0, {fs / 2}) Hz.")
    order = int(order)
    numtaps = order + 1
    lowpass = sps.firwin(numtaps, cutoff_hz, window="hamming", pass_zero="lowpass", fs=fs)
    m = np.arange(numtaps) - order / 2
    allpass = sps.get_window("hamming", numtaps, fftbins=False) * np.sinc(m)
    allpass /= allpass.sum()
    highpass = allpass - lowpass
    # resíduo de arredondamento no DC
    highpass -= highpass.sum() / numtaps
    logger.debug(f"FIR passa-altas projetado: corte={cutoff_hz} Hz, ordem={order}, fs={fs} Hz")
    return FirFilter(highpass, float(cutoff_hz), order, float(fs))


def magnitude_response(fir: FirFilter, frequencies) -> np.ndarray:
    """|H(f)| nas frequências pedidas (Hz)."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=np.float64))
    _, h = sps.freqz(fir.coefficients, worN=freqs, fs=fir.fs)
    return np.abs(h)


def apply_fir(fir: FirFilter, signal: Signal | MultiSignal, compensate_delay: bool = False):
    """Convolução linear com bordas zeradas; saída com o mesmo comprimento da entrada.

    Com `compensate_delay` a saída é adiantada em order // 2 amostras.
    """
    n = len(signal)
    taps = fir.coefficients.shape[0]
    if n <= taps:
        raise LengthError(f"Sinal com {n} amostras não é maior que o filtro ({taps} coeficientes).")
    x = signal.samples if isinstance(signal, Signal) else signal.data
    shift = fir.order // 2 if compensate_delay else 0
    if shift:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, shift)]
        x = np.pad(x, pad)
    y = sps.lfilter(fir.coefficients, [1.0], x, axis=-1)[..., shift:shift + n]
    if isinstance(signal, Signal):
        return signal.with_samples(y)
    return signal.with_data(y)


def rational_ratio(fs: float, target_fs: float, max_term: int = MAX_RATIO_TERM) -> tuple[int, int]:
    """(up, down) irredutíveis com target_fs / fs = up / down."""
    if not target_fs > 0 or not fs > 0:
        raise ParameterError(f"Taxas devem ser positivas (fs={fs}, alvo={target_fs}).")
    ratio = Fraction(target_fs) / Fraction(fs)
    if ratio.numerator > max_term or ratio.denominator > max_term:
        raise ParameterError(
            f"Razão {target_fs}/{fs} não é racional com termos <= {max_term}.")
    return ratio.numerator, ratio.denominator


def resample(signal: Signal | MultiSignal, target_fs: float):
    """Reamostragem polifásica racional; comprimento = round(n * alvo / fs)."""
    up, down = rational_ratio(signal.fs, target_fs)
    x = signal.samples if isinstance(signal, Signal) else signal.data
    n = x.shape[-1]
    n_out = int(round(n * up / down))
    if up == down:
        y = np.array(x, copy=True)
    else:
        y = sps.resample_poly(x, up, down, axis=-1)
    if y.shape[-1] >= n_out:
        y = y[..., :n_out]
    else:
        pad = [(0, 0)] * (y.ndim - 1) + [(0, n_out - y.shape[-1])]
        y = np.pad(y, pad)
    logger.debug(f"Reamostrado {signal.fs} Hz -> {target_fs} Hz (up={up}, down={down}), {n} -> {n_out} amostras")
    if isinstance(signal, Signal):
        return Signal(y, target_fs)
    return MultiSignal(signal.channels, y, target_fs)


def _standardize_rows(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    std = np.sqrt(np.mean(centered ** 2, axis=-1, keepdims=True))
    scale = np.maximum(np.abs(mean), 1.0)
    if np.any(std <= 1e-12 * scale):
        raise DegenerateSignalError("Sinal constante: desvio padrão nulo, impossível padronizar.")
    return centered / std


def standardize(signal: Signal | MultiSignal):
    """Média zero e desvio padrão populacional 1 (por canal)."""
    if isinstance(signal, Signal):
        return signal.with_samples(_standardize_rows(signal.samples[np.newaxis, :])[0])
    return signal.with_data(_standardize_rows(signal.data))


def xcorr_align(recorded: Signal, reference: Signal, max_lag: int) -> int:
    """Atraso (amostras) de `recorded` em relação a `reference` via correlação normalizada.

    Positivo quando `recorded` está atrasado: recorded[t] ~ reference[t - lag].
    """
    if recorded.fs != reference.fs:
        raise ParameterError(f"Taxas diferentes: {recorded.fs} Hz vs {reference.fs} Hz.")
    a = recorded.samples - recorded.samples.mean()
    b = reference.samples - reference.samples.mean()
    if max_lag < 0 or max_lag >= min(a.size, b.size):
        raise ParameterError(f"max_lag={max_lag} deve estar em [0, {min(a.size, b.size)}).")

    full = sps.correlate(a, b, mode="full", method="auto")
    lags = sps.correlation_lags(a.size, b.size, mode="full")
    window = np.abs(lags) <= max_lag
    full, lags = full[window], lags[window]

    ca = np.concatenate([[0.0], np.cumsum(a ** 2)])
    cb = np.concatenate([[0.0], np.cumsum(b ** 2)])
    # sobreposição para atraso k: a[k + n] com b[n]
    start_a = np.maximum(lags, 0)
    start_b = np.maximum(-lags, 0)
    length = np.minimum(a.size - start_a, b.size - start_b)
    energy_a = ca[start_a + np.maximum(length, 0)] - ca[start_a]
    energy_b = cb[start_b + np.maximum(length, 0)] - cb[start_b]
    denom = np.sqrt(energy_a * energy_b)
    valid = (length > 0) & (denom > 0)
    if not np.any(valid):
        raise AlignmentError("Nenhum atraso com sobreposição não nula entre os sinais.")
    score = np.full(full.shape, -np.inf)
    score[valid] = full[valid] / denom[valid]
    best = int(lags[int(np.argmax(score))])
    logger.debug(f"Alinhamento por correlação cruzada: atraso={best} amostras (pico {score.max():.3f})")
    return best


def preprocess_eeg(raw: MultiSignal, target_fs: float = ANALYSIS_FS,
                   cutoff_hz: float = HIGHPASS_CUTOFF_HZ, order: int | None = None) -> MultiSignal:
    """Passa-altas na taxa nativa -> reamostragem para 64 Hz -> padronização."""
    if order is None:
        order = max(2, int(round(HIGHPASS_ORDER * raw.fs / EEG_FS)))
    fir = design_highpass_sinc(cutoff_hz, order, raw.fs)
    filtered = apply_fir(fir, raw, compensate_delay=True)
    return standardize(resample(filtered, target_fs))
