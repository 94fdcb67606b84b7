import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.features import FeatureKind
from core.linear import SpeakerRole, pearson
from core.trf_analysis import crossval_trf, difference_trf
from handlers.synth import SynthConfig, gen_dataset, gen_feature, gen_trf, gen_trial, participant_name
from utils.errors import ParameterError

ENV = FeatureKind.ENVELOPE


def test_feature_is_seeded():
    assert_allclose(gen_feature(30.0, seed=3).samples, gen_feature(30.0, seed=3).samples)
    assert not np.allclose(gen_feature(30.0, seed=3).samples, gen_feature(30.0, seed=4).samples)


def test_feature_is_band_limited_and_standardized():
    feat = gen_feature(150.0, seed=1)
    assert len(feat) == 9600 and feat.standardized
    assert abs(feat.samples.mean()) < 1e-10 and feat.samples.std() == pytest.approx(1.0)
    power = np.abs(np.fft.rfft(feat.samples)) ** 2
    freqs = np.fft.rfftfreq(feat.samples.size, 1 / 64)
    assert power[freqs > 16].sum() < 0.01 * power.sum()


def test_features_from_different_seeds_are_unrelated():
    assert abs(pearson(gen_feature(150.0, seed=10).samples, gen_feature(150.0, seed=11).samples)) < 0.1


def test_default_trf_peaks():
    trf = gen_trf()
    assert trf.coefficients.shape == (2, 160)
    lat = trf.latencies
    assert abs(lat[np.argmax(trf.coefficients[0])] - 0.1) <= 1 / 64
    assert abs(lat[np.argmin(trf.coefficients[0])] - 0.2) <= 1 / 64
    assert_allclose(trf.coefficients[1], 0.7 * trf.coefficients[0])


def test_trf_shapes():
    assert not gen_trf(peaks=()).coefficients.any()
    trf = gen_trf(peaks=((0.5, 0.02, 2.0),))
    assert abs(trf.latencies[np.argmax(trf.coefficients[0])] - 0.5) <= 1 / 64
    with pytest.raises(ParameterError):
        gen_trf(peaks=((1.6, 0.02, 1.0),))
    with pytest.raises(ParameterError):
        gen_trf(peaks=((1.49, 0.02, 1.0),))
    with pytest.raises(ParameterError):
        gen_trf(peaks=((0.1, 0.0, 1.0),))


def test_config_validation():
    with pytest.raises(ParameterError):
        SynthConfig(g_att=0.5, g_ign=1.0)
    with pytest.raises(ParameterError):
        SynthConfig(duration=0.0)
    with pytest.raises(ParameterError):
        SynthConfig(trials=0)
    with pytest.raises(ParameterError):
        SynthConfig(channel_gains=(1.0,))
    assert SynthConfig(g_att=0.0, g_ign=0.0).n_samples == 9600
    assert SynthConfig().to_dict()["peaks"] == [[0.1, 0.025, 1.0], [0.2, 0.035, -1.0]]


@pytest.mark.parametrize("pink", [False, True])
def test_realized_snr(pink):
    config = SynthConfig(trials=1, duration=60.0, snr_db=-10.0, pink_noise=pink)
    trial = gen_trial(config, 1, seed=2)
    assert trial.realized_snr_db == pytest.approx(-10.0, abs=0.5)
    eeg = trial.bundle.eeg.data
    assert_allclose(eeg.mean(axis=1), 0.0, atol=1e-10)
    assert_allclose(eeg.std(axis=1), 1.0)


def test_ignored_speaker_without_gain():
    config = SynthConfig(trials=1, duration=150.0, g_att=1.0, g_ign=0.0, snr_db=0.0)
    bundle = gen_trial(config, 1, seed=6).bundle
    ignored = bundle.feature(SpeakerRole.IGNORED, ENV).samples
    for channel in bundle.eeg.data:
        assert abs(pearson(channel, ignored)) < 0.1


def test_pure_noise_trial():
    config = SynthConfig(trials=1, duration=20.0, g_att=0.0, g_ign=0.0)
    trial = gen_trial(config, 1, seed=0)
    assert trial.realized_snr_db == float("-inf")
    assert_allclose(trial.bundle.eeg.data.std(axis=1), 1.0)


def test_attention_alternates_every_four_trials():
    config = SynthConfig(participants=1, trials=9, duration=5.0)
    participants, _ = gen_dataset(config, n_jobs=1)
    labels = [t.attended_label for t in participants[0].trials]
    assert labels == ["male"] * 4 + ["female"] * 4 + ["male"]
    assert [t.index for t in participants[0].trials] == list(range(1, 10))
    for trial in participants[0].trials:
        assert set(trial.kinds) == {FeatureKind.ENVELOPE, FeatureKind.ONSET_ENVELOPE}


def test_dataset_is_reproducible():
    config = SynthConfig(participants=2, trials=2, duration=10.0, seed=5)
    first, truth = gen_dataset(config, n_jobs=1)
    second, _ = gen_dataset(config, n_jobs=2)
    assert [p.name for p in first] == [participant_name(0), participant_name(1)] == ["P01", "P02"]
    for a, b in zip(first, second):
        for ta, tb in zip(a.trials, b.trials):
            assert np.array_equal(ta.eeg.data, tb.eeg.data)
            assert np.array_equal(ta.feat_ignored[ENV].samples, tb.feat_ignored[ENV].samples)
    assert not np.array_equal(first[0].trials[0].eeg.data, first[1].trials[0].eeg.data)
    assert truth["g_att"] == 1.0 and truth["lags"] == [-64, 96]
    assert np.asarray(truth["trf"]).shape == (2, 160)


@pytest.mark.slow
def test_full_pipeline_recovers_planted_kernel():
    config = SynthConfig(participants=1, trials=16, duration=150.0, g_att=1.0, g_ign=0.5, snr_db=-5.0, seed=21)
    participants, truth = gen_dataset(config, n_jobs=1)
    trials = participants[0].trials
    planted = np.asarray(truth["trf"])
    attended = crossval_trf(trials, ENV, SpeakerRole.ATTENDED)
    for fitted, true in zip(attended.coefficients, planted):
        assert np.corrcoef(fitted, true)[0, 1] > 0.9
    diff = difference_trf(attended, crossval_trf(trials, ENV, SpeakerRole.IGNORED))
    lat = diff.latencies
    peak = lat[np.argmax(np.abs(diff.coefficients[0]))]
    assert min(abs(peak - 0.1), abs(peak - 0.2)) <= 1 / 64 + 1e-9
