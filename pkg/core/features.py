"""Envelope auditivo (banco gammatone em escala ERB) e envelope de onsets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal as sps
from scipy.special import factorial

from core.signals import ANALYSIS_FS, MultiSignal, Signal, resample, standardize
from utils.errors import ParameterError

logger = logging.getLogger(__name__)

# --- Configurações ---
AUDIO_FS = 44100.0
N_BANDS = 28
FMIN_HZ = 50.0
FMAX_HZ = 5000.0
GAMMATONE_ORDER = 4


class FeatureKind(str, Enum):
    ENVELOPE = "envelope"
    ONSET_ENVELOPE = "onset_envelope"

    @classmethod
    def parse(cls, value: "str | FeatureKind") -> "FeatureKind":
        if isinstance(value, cls):
            return value
        aliases = {"envelope": cls.ENVELOPE, "onsets": cls.ONSET_ENVELOPE,
                   "onset_envelope": cls.ONSET_ENVELOPE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ParameterError(f"Tipo de feature desconhecido: '{value}'") from None

    @property
    def short_name(self) -> str:
        return "envelope" if self is FeatureKind.ENVELOPE else "onsets"


@dataclass(frozen=True)
class FeatureSignal:
    signal: Signal
    kind: FeatureKind
    standardized: bool = True

    @property
    def samples(self) -> np.ndarray:
        return self.signal.samples

    @property
    def fs(self) -> float:
        return self.signal.fs

    def __len__(self) -> int:
        return len(self.signal)


@dataclass(frozen=True)
class GammatoneBank:
    center_frequencies: tuple[float, ...]
    fs: float
    order: int = GAMMATONE_ORDER

    def __post_init__(self):
        centers = np.asarray(self.center_frequencies, dtype=np.float64)
        if centers.size < 2 or np.any(np.diff(centers) <= 0):
            raise ParameterError("Frequências centrais devem ser estritamente crescentes.")
        if centers[-1] >= self.fs / 2:
            raise ParameterError(f"Frequência central {centers[-1]} Hz acima de Nyquist ({self.fs / 2} Hz).")
        object.__setattr__(self, "center_frequencies", tuple(float(c) for c in centers))

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(f"gt{k:02d}" for k in range(len(self.center_frequencies)))


def erb_number(frequency_hz):
    """Número ERB de Glasberg & Moore."""
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(frequency_hz, dtype=np.float64))


def erb_bandwidth(frequency_hz):
    return 24.7 + 0.107939 * np.asarray(frequency_hz, dtype=np.float64)


def erb_centers(n: int = N_BANDS, fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> list[float]:
    """Frequências com números ERB igualmente espaçados; extremos exatos."""
    if n < 2:
        raise ParameterError(f"São necessárias pelo menos 2 bandas (recebido {n}).")
    if not 0 < fmin < fmax:
        raise ParameterError(f"Exige 0 < fmin < fmax (recebido {fmin}, {fmax}).")
    numbers = np.linspace(erb_number(fmin), erb_number(fmax), n)
    centers = (10.0 ** (numbers / 21.4) - 1.0) / 0.00437
    centers[0], centers[-1] = fmin, fmax
    return centers.tolist()


def make_gammatone_bank(fs: float = AUDIO_FS, n: int = N_BANDS,
                        fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> GammatoneBank:
    return GammatoneBank(tuple(erb_centers(n, fmin, fmax)), fs)


def _band_coefficients(center_hz: float, fs: float, order: int) -> tuple[complex, float]:
    """Polo complexo e ganho da cascata de `order` ressonadores de um polo."""
    a_gamma = (np.pi * factorial(2 * order - 2) * 2.0 ** -(2 * order - 2)
               / factorial(order - 1) ** 2)
    b = erb_bandwidth(center_hz) / a_gamma
    lam = np.exp(-2 * np.pi * b / fs)
    beta = 2 * np.pi * center_hz / fs
    pole = lam * np.exp(1j * beta)

    # ganho da parte real: (H(w) + conj(H(-w))) / 2 avaliado em w = beta
    def cascade(w):
        return 1.0 / (1.0 - pole * np.exp(-1j * w)) ** order

    real_part_gain = abs(cascade(beta) + np.conj(cascade(-beta))) / 2
    return pole, 1.0 / real_part_gain


def _gammatone_band(x: np.ndarray, center_hz: float, fs: float, order: int) -> np.ndarray:
    pole, gain = _band_coefficients(center_hz, fs, order)
    y = x.astype(np.complex128) * gain
    for _ in range(order):
        y = sps.lfilter([1.0], [1.0, -pole], y)
    return y.real


def gammatone_subbands(audio: Signal, bank: GammatoneBank):
    """Respostas gammatone de 4ª ordem, uma por frequência central."""
    if audio.fs != bank.fs:
        raise ParameterError(f"fs do áudio ({audio.fs} Hz) difere do banco ({bank.fs} Hz).")
    bands = np.vstack([_gammatone_band(audio.samples, fc, bank.fs, bank.order)
                       for fc in bank.center_frequencies])
    return MultiSignal(bank.channel_names, bands, audio.fs)


def auditory_envelope(audio: Signal, bank: GammatoneBank | None = None,
                      target_fs: float = ANALYSIS_FS, standardize_output: bool = True) -> FeatureSignal:
    """Sub-bandas -> retificação de meia onda -> média entre bandas -> 64 Hz -> padronização."""
    bank = bank or make_gammatone_bank(audio.fs)
    if audio.fs != bank.fs:
        raise ParameterError(f"fs do áudio ({audio.fs} Hz) difere do banco ({bank.fs} Hz).")
    # acumula banda a banda; 28 sub-bandas a 44.1 kHz não cabem juntas na memória
    total = np.zeros(len(audio))
    for fc in bank.center_frequencies:
        total += np.maximum(_gammatone_band(audio.samples, fc, bank.fs, bank.order), 0.0)
    envelope = resample(Signal(total / len(bank.center_frequencies), audio.fs), target_fs)
    # o anti-aliasing pode oscilar abaixo de zero; o envelope é não negativo
    envelope = envelope.with_samples(np.maximum(envelope.samples, 0.0))
    logger.debug(f"Envelope auditivo: {len(audio)} amostras @ {audio.fs} Hz -> {len(envelope)} @ {target_fs} Hz")
    if standardize_output:
        return FeatureSignal(standardize(envelope), FeatureKind.ENVELOPE, True)
    return FeatureSignal(envelope, FeatureKind.ENVELOPE, False)


def onset_envelope(envelope: FeatureSignal, standardize_output: bool = True) -> FeatureSignal:
    """Derivada (diferença progressiva x fs) retificada em meia onda.

    A última amostra repete a penúltima para manter o comprimento.
    """
    if envelope.kind is not FeatureKind.ENVELOPE:
        raise ParameterError(f"onset_envelope espera um envelope, recebeu {envelope.kind.value}.")
    x = envelope.samples
    if x.size < 2:
        raise ParameterError("Envelope precisa de pelo menos 2 amostras.")
    derivative = np.diff(x) * envelope.fs
    derivative = np.append(derivative, derivative[-1])
    onsets = Signal(np.maximum(derivative, 0.0), envelope.fs)
    if standardize_output and np.ptp(onsets.samples) == 0:
        # sem onsets (envelope constante ou só decrescente): zeros
        return FeatureSignal(Signal(np.zeros(x.size), envelope.fs), FeatureKind.ONSET_ENVELOPE, True)
    if standardize_output:
        return FeatureSignal(standardize(onsets), FeatureKind.ONSET_ENVELOPE, True)
    return FeatureSignal(onsets, FeatureKind.ONSET_ENVELOPE, False)


def speech_features(audio: Signal, bank: GammatoneBank | None = None) -> dict[FeatureKind, FeatureSignal]:
    """As duas features padronizadas a 64 Hz; o onset vem do envelope antes da padronização."""
    raw = auditory_envelope(audio, bank, standardize_output=False)
    return {
        FeatureKind.ENVELOPE: FeatureSignal(standardize(raw.signal), FeatureKind.ENVELOPE, True),
        FeatureKind.ONSET_ENVELOPE: onset_envelope(raw),
    }
