"""Gerador de datasets sintéticos com TRF plantada, modulação por atenção e SNR controlada."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from core.features import FeatureKind, FeatureSignal, onset_envelope
from core.linear import TRF_LAGS, LagSpec, SpeakerRole, Trf, build_lag_matrix
from core.signals import ANALYSIS_FS, MultiSignal, Signal, standardize
from database.models import LABELS, Participant, TrialBundle, other_label, protocol_label
from utils.config import n_jobs as default_jobs
from utils.errors import ParameterError
from utils.seeding import as_seed_sequence, spawn

logger = logging.getLogger(__name__)

# --- Configurações ---
CHANNELS = ("bilateral", "unilateral")
FEATURE_CUTOFF_HZ = 8.0
# (latência s, largura s, amplitude)
DEFAULT_PEAKS = ((0.1, 0.025, 1.0), (0.2, 0.035, -1.0))
MIN_LATENCY_S = -1.0
MAX_LATENCY_S = 1.5


@dataclass(frozen=True)
class SynthConfig:
    participants: int = 18
    trials: int = 16
    duration: float = 150.0
    g_att: float = 1.0
    g_ign: float = 0.5
    snr_db: float = -5.0
    seed: int = 0
    peaks: tuple[tuple[float, float, float], ...] = DEFAULT_PEAKS
    channel_gains: tuple[float, ...] = (1.0, 0.7)
    fs: float = ANALYSIS_FS
    # ganho do onset no sinal que dirige o EEG (0 = só envelope)
    onset_gain: float = 0.0
    pink_noise: bool = False

    def __post_init__(self):
        if self.participants < 1 or self.trials < 1:
            raise ParameterError("participants e trials devem ser >= 1.")
        if not self.duration > 0:
            raise ParameterError("duration deve ser positiva.")
        # g_att == g_ign é permitido: razão 1 (sem modulação) e ruído puro (ambos 0)
        if not self.g_att >= self.g_ign >= 0:
            raise ParameterError(f"Ganhos inválidos: g_att={self.g_att}, g_ign={self.g_ign} (exige g_att >= g_ign >= 0).")
        if len(self.channel_gains) != len(CHANNELS):
            raise ParameterError(f"channel_gains precisa de {len(CHANNELS)} valores.")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["peaks"] = [list(p) for p in self.peaks]
        out["channel_gains"] = list(self.channel_gains)
        return out


def gen_feature(duration: float, fs: float = ANALYSIS_FS, seed=0, cutoff_hz: float = FEATURE_CUTOFF_HZ) -> FeatureSignal:
    """Processo positivo passa-baixas (< cutoff), padronizado; substituto de envelope de fala."""
    if not duration > 0:
        raise ParameterError("duration deve ser positiva.")
    n = int(round(duration * fs))
    rng = np.random.default_rng(as_seed_sequence(seed))
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    # rolloff cosseno entre 0.75·cutoff e cutoff
    taper = np.clip((cutoff_hz - freqs) / (0.25 * cutoff_hz), 0.0, 1.0)
    x = np.fft.irfft(spectrum * np.sin(0.5 * np.pi * taper) ** 2, n)
    envelope = Signal(x - x.min(), fs)
    return FeatureSignal(standardize(envelope), FeatureKind.ENVELOPE, True)


def gen_trf(peaks=DEFAULT_PEAKS, channel_gains=(1.0, 0.7), lags: LagSpec = TRF_LAGS,
            channels=CHANNELS, kind: FeatureKind = FeatureKind.ENVELOPE) -> Trf:
    """Soma de picos gaussianos no eixo de latências, escalada por canal."""
    latencies = lags.latencies
    kernel = np.zeros(lags.taps)
    for latency, width, amplitude in peaks:
        if not MIN_LATENCY_S <= latency <= MAX_LATENCY_S:
            raise ParameterError(f"Latência {latency} s fora de [{MIN_LATENCY_S}, {MAX_LATENCY_S}].")
        if not latencies[0] <= latency <= latencies[-1]:
            raise ParameterError(f"Latência {latency} s fora do eixo [{latencies[0]:.3f}, {latencies[-1]:.3f}] s.")
        if width <= 0:
            raise ParameterError("Largura do pico deve ser positiva.")
        kernel += amplitude * np.exp(-0.5 * ((latencies - latency) / width) ** 2)
    coefficients = np.outer(np.asarray(channel_gains, dtype=np.float64), kernel)
    return Trf(coefficients, lags, tuple(channels), kind, SpeakerRole.ATTENDED)


def convolve_trf(trf: Trf, feature: np.ndarray) -> np.ndarray:
    """EEG[c, t] = soma_j TRF[c, j] · x[t - lag_j] (mesma convenção do ajuste)."""
    return (build_lag_matrix(feature, trf.lags) @ trf.coefficients.T).T


def _noise(rng: np.random.Generator, shape: tuple[int, int], pink: bool) -> np.ndarray:
    white = rng.standard_normal(shape)
    if not pink:
        return white
    n = shape[1]
    freqs = np.fft.rfftfreq(n)
    shaping = np.zeros_like(freqs)
    shaping[1:] = 1.0 / np.sqrt(freqs[1:])
    return np.fft.irfft(np.fft.rfft(white, axis=-1) * shaping, n, axis=-1)


@dataclass(frozen=True)
class SynthTrial:
    """Ensaio gerado e a SNR realizada antes da padronização."""
    bundle: TrialBundle
    realized_snr_db: float


def gen_trial(config: SynthConfig, index: int, seed=0, trf: Trf | None = None) -> SynthTrial:
    trf = trf or gen_trf(config.peaks, config.channel_gains)
    feat_seed, noise_seed = spawn(seed, 2)
    n = config.n_samples
    envelopes = {label: gen_feature(config.duration, config.fs, s)
                 for label, s in zip(LABELS, feat_seed.spawn(len(LABELS)))}
    features = {label: {FeatureKind.ENVELOPE: env, FeatureKind.ONSET_ENVELOPE: onset_envelope(env)}
                for label, env in envelopes.items()}
    attended = protocol_label(index)
    ignored = other_label(attended)

    def drive(label: str) -> np.ndarray:
        feats = features[label]
        x = feats[FeatureKind.ENVELOPE].samples
        if config.onset_gain:
            x = x + config.onset_gain * feats[FeatureKind.ONSET_ENVELOPE].samples
        return convolve_trf(trf, x)

    signal = config.g_att * drive(attended) + config.g_ign * drive(ignored)
    noise = _noise(np.random.default_rng(noise_seed), (len(trf.channels), n), config.pink_noise)
    signal_power = np.mean(signal ** 2, axis=-1, keepdims=True)
    noise_power = np.mean(noise ** 2, axis=-1, keepdims=True)
    if np.all(signal_power > 0):
        noise = noise * np.sqrt(signal_power / noise_power / 10 ** (config.snr_db / 10))
        realized = float(10 * np.log10(signal_power.sum() / np.mean(noise ** 2, axis=-1).sum()))
    else:
        noise = noise / np.sqrt(noise_power)
        realized = float("-inf")
    eeg = standardize(MultiSignal(trf.channels, signal + noise, config.fs))
    bundle = TrialBundle(index, eeg, features[attended], features[ignored], attended)
    return SynthTrial(bundle, realized)


def _gen_participant(config: SynthConfig, name: str, seed, trf: Trf) -> Participant:
    trials = [gen_trial(config, i + 1, s, trf).bundle for i, s in enumerate(spawn(seed, config.trials))]
    logger.debug(f"Participante sintético {name}: {len(trials)} ensaios gerados.")
    return Participant(name, trials)


def participant_name(i: int) -> str:
    return f"P{i + 1:02d}"


def gen_dataset(config: SynthConfig, n_jobs: int | None = None) -> tuple[list[Participant], dict]:
    """Participantes sintéticos + verdade plantada (para o truth.json)."""
    trf = gen_trf(config.peaks, config.channel_gains)
    seeds = spawn(config.seed, config.participants)
    jobs = n_jobs or default_jobs()
    participants = Parallel(n_jobs=jobs)(
        delayed(_gen_participant)(config, participant_name(i), s, trf) for i, s in enumerate(seeds))
    truth = {
        "config": config.to_dict(),
        "channels": list(trf.channels),
        "lags": [trf.lags.lag_min, trf.lags.lag_max],
        "fs": config.fs,
        "trf": trf.coefficients.tolist(),
        "g_att": config.g_att,
        "g_ign": config.g_ign,
        "snr_db": config.snr_db,
    }
    logger.info(f"Dataset sintético: {len(participants)} participantes x {config.trials} ensaios "
                f"({config.duration:.0f} s, SNR {config.snr_db} dB, g_att/g_ign={config.g_att}/{config.g_ign}).")
    return participants, truth
