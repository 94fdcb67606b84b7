import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.features import (FeatureKind, FeatureSignal, auditory_envelope, erb_centers, erb_number,
                           gammatone_subbands, make_gammatone_bank, onset_envelope, speech_features)
from core.signals import Signal, resample
from utils.errors import DegenerateSignalError, ParameterError

FS = 44100.0


@pytest.fixture(scope="module")
def bank():
    return make_gammatone_bank(FS)


@pytest.fixture(scope="module")
def am_noise():
    rng = np.random.default_rng(5)
    t = np.arange(int(4 * FS)) / FS
    modulator = 0.5 * (1 - np.cos(2 * np.pi * 2.0 * t))
    return Signal(rng.standard_normal(t.size) * modulator, FS), Signal(modulator, FS)


def test_erb_centers_defaults():
    centers = erb_centers()
    assert len(centers) == 28
    assert centers[0] == 50.0 and centers[-1] == 5000.0
    assert np.all(np.diff(centers) > 0)
    gaps = np.diff(erb_number(centers))
    assert_allclose(gaps, gaps.mean(), rtol=1e-9)
    assert gaps.mean() == pytest.approx((29.08 - 1.837) / 27, abs=2e-3)


def test_erb_centers_two_points_and_errors():
    assert erb_centers(2, 100.0, 200.0) == [100.0, 200.0]
    with pytest.raises(ParameterError):
        erb_centers(1)
    with pytest.raises(ParameterError):
        erb_centers(10, 500.0, 100.0)


def test_subbands_zero_input(bank):
    out = gammatone_subbands(Signal(np.zeros(2000), FS), bank)
    assert out.n_channels == 28
    assert not out.data.any()


def test_subbands_fs_mismatch(bank):
    with pytest.raises(ParameterError):
        gammatone_subbands(Signal(np.zeros(100), 16000.0), bank)


@pytest.mark.parametrize("k", [0, 9, 18, 27])
def test_tone_peaks_in_own_band(bank, k):
    t = np.arange(int(0.5 * FS)) / FS
    tone = Signal(np.sin(2 * np.pi * bank.center_frequencies[k] * t), FS)
    out = gammatone_subbands(tone, bank).data[:, int(0.2 * FS):]
    rms = np.sqrt(np.mean(out ** 2, axis=1))
    assert int(np.argmax(rms)) == k
    # ganho unitário no centro
    assert rms[k] == pytest.approx(np.sqrt(0.5), rel=0.05)


def test_envelope_tracks_modulator(bank, am_noise):
    audio, modulator = am_noise
    env = auditory_envelope(audio, bank)
    assert env.fs == 64.0 and env.kind is FeatureKind.ENVELOPE
    target = resample(modulator, 64.0).samples
    assert np.corrcoef(env.samples, target)[0, 1] > 0.8


def test_envelope_nonnegative_and_homogeneous(bank, am_noise):
    audio, _ = am_noise
    short = Signal(audio.samples[: int(FS)], FS)
    raw = auditory_envelope(short, bank, standardize_output=False)
    assert np.all(raw.samples >= 0)
    scaled = auditory_envelope(Signal(3.0 * short.samples, FS), bank, standardize_output=False)
    assert_allclose(scaled.samples, 3.0 * raw.samples, rtol=1e-9, atol=1e-12)


def test_envelope_of_silence(bank):
    with pytest.raises(DegenerateSignalError):
        auditory_envelope(Signal(np.zeros(int(0.5 * FS)), FS), bank)


def _raw_envelope(values, fs=64.0):
    return FeatureSignal(Signal(values, fs), FeatureKind.ENVELOPE, standardized=False)


def test_onset_rules():
    assert not onset_envelope(_raw_envelope(np.full(20, 2.0)), standardize_output=False).samples.any()
    ramp = onset_envelope(_raw_envelope(0.5 * np.arange(20) / 64.0), standardize_output=False).samples
    assert_allclose(ramp, 0.5)
    falling = onset_envelope(_raw_envelope(-np.arange(20.0)), standardize_output=False).samples
    assert not falling.any()


def test_onsets_of_flat_envelope_are_zero():
    for values in (np.full(20, 2.0), -np.arange(20.0)):
        onsets = onset_envelope(_raw_envelope(values))
        assert onsets.kind is FeatureKind.ONSET_ENVELOPE and onsets.standardized
        assert onsets.samples.shape == (20,)
        assert not onsets.samples.any()


def test_onset_requires_envelope():
    onsets = FeatureSignal(Signal(np.arange(10.0), 64.0), FeatureKind.ONSET_ENVELOPE)
    with pytest.raises(ParameterError):
        onset_envelope(onsets)


def test_onsets_are_sparser(bank, am_noise):
    audio, _ = am_noise
    feats = speech_features(audio, bank)
    env = auditory_envelope(audio, bank, standardize_output=False).samples
    onsets = onset_envelope(auditory_envelope(audio, bank, standardize_output=False),
                            standardize_output=False).samples
    assert np.all(onsets >= 0)
    assert np.mean(onsets < 0.1 * onsets.max()) > np.mean(env < 0.1 * env.max())
    for feat in feats.values():
        assert abs(feat.samples.mean()) < 1e-10 and abs(feat.samples.std() - 1) < 1e-10


def test_feature_kind_parse():
    assert FeatureKind.parse("onsets") is FeatureKind.ONSET_ENVELOPE
    assert FeatureKind.parse("envelope").short_name == "envelope"
    with pytest.raises(ParameterError):
        FeatureKind.parse("pitch")
