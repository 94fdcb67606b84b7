import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from core.cca import (EEG_LAGS, FEATURE_LAGS, LdaClassifier, correlation_vector, correlations_from_design,
                      decode_cca, decode_cca_design, difference_vectors, fit_cca, fit_lda, trial_design,
                      train_cca_decoder)
from core.features import FeatureKind, FeatureSignal
from core.linear import SpeakerRole
from core.signals import MultiSignal, Signal
from utils.errors import DegenerateClassifierError, ParameterError, SingularityError

ENV = FeatureKind.ENVELOPE


def _coupled(rng, n=400, dx=6, dy=4):
    shared = rng.standard_normal((n, 3))
    X = shared @ rng.standard_normal((3, dx)) + rng.standard_normal((n, dx))
    Y = shared @ rng.standard_normal((3, dy)) + rng.standard_normal((n, dy))
    return X, Y


def test_identical_inputs_fully_correlated(rng):
    X = rng.standard_normal((300, 5))
    model = fit_cca(X, X)
    assert model.n_comp == 5
    assert_allclose(model.rho, 1.0, atol=1e-8)


def test_independent_noise_low_correlation(rng):
    model = fit_cca(rng.standard_normal((10_000, 10)), rng.standard_normal((10_000, 10)))
    assert np.all(model.rho < 0.1)
    assert np.all(np.diff(model.rho) <= 0)


def test_matches_generalized_eigenproblem(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y)
    Xc, Yc = X - X.mean(0), Y - Y.mean(0)
    n = X.shape[0] - 1
    cxx, cyy, cxy = Xc.T @ Xc / n, Yc.T @ Yc / n, Xc.T @ Yc / n
    vals, vecs = linalg.eigh(cxy @ np.linalg.solve(cyy, cxy.T), cxx)
    order = np.argsort(vals)[::-1][:4]
    assert_allclose(model.rho, np.sqrt(vals[order]), atol=1e-8)
    assert_allclose(np.abs(model.wx), np.abs(vecs[:, order]), atol=1e-6)


def test_projected_components(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y)
    u, v = model.project_eeg(X), model.project_feature(Y)
    assert_allclose(u.var(axis=0, ddof=1), 1.0, atol=1e-8)
    assert_allclose(v.var(axis=0, ddof=1), 1.0, atol=1e-8)
    corr = np.corrcoef(u.T, v.T)
    k = model.n_comp
    assert_allclose(corr[:k, :k], np.eye(k), atol=1e-6)
    assert_allclose(corr[:k, k:], np.diag(model.rho), atol=1e-6)


def test_invariant_to_invertible_transforms(rng):
    X, Y = _coupled(rng)
    A = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    B = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    assert_allclose(fit_cca(X @ A, Y @ B).rho, fit_cca(X, Y).rho, atol=1e-8)


def test_rank_deficiency(rng):
    X = rng.standard_normal((100, 3))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    Y = rng.standard_normal((100, 2))
    with pytest.raises(SingularityError):
        fit_cca(X, Y)
    assert fit_cca(X, Y, shrinkage=1e-2).n_comp == 2
    with pytest.raises(ParameterError):
        fit_cca(X, Y[:50])
    with pytest.raises(ParameterError):
        fit_cca(X, Y, shrinkage=-0.1)


def test_truncate(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y).truncate(2)
    assert model.wx.shape == (6, 2) and model.wy.shape == (4, 2) and model.n_comp == 2
    with pytest.raises(ParameterError):
        model.truncate(3)


def test_correlations_on_training_data(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y)
    assert correlations_from_design(model, X, Y)[0] == pytest.approx(model.rho[0], abs=1e-10)
    unrelated = rng.standard_normal(Y.shape)
    matched = np.abs(correlations_from_design(model, X, Y)).mean()
    assert np.abs(correlations_from_design(model, X, unrelated)).mean() < matched


def test_degenerate_segment_gives_zeros(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y)
    assert not correlations_from_design(model, X[:50], np.ones((50, 4))).any()
    assert not correlations_from_design(model, X[:1], Y[:1]).any()


def test_correlation_vector_from_signals(small_participant):
    trial = small_participant.trials[0]
    design = trial_design(trial, ENV)
    model = fit_cca(design.X, design.attended, 1e-2, eeg_lags=EEG_LAGS, feature_lags=FEATURE_LAGS,
                    channels=trial.eeg.channels, kind=ENV)
    vec = correlation_vector(model, trial.eeg, trial.feature(SpeakerRole.ATTENDED, ENV))
    assert vec.shape == (16,)
    assert np.all(np.abs(vec) <= 1.0)
    assert_allclose(vec, correlations_from_design(model, design.X, design.attended))


def test_lda_symmetric_classes(rng):
    v = rng.standard_normal((40, 3)) + [1.0, 0.5, -0.2]
    lda = fit_lda(v, -v)
    assert lda.bias == 0.0
    x = rng.standard_normal((10, 3))
    assert_allclose(lda.margin(x), x @ lda.weights)


def test_lda_separable(rng):
    pos = rng.standard_normal((50, 4)) * 0.3 + 2.0
    neg = rng.standard_normal((50, 4)) * 0.3 - 2.0
    lda = fit_lda(pos, neg)
    assert lda.predict(pos).all()
    assert not lda.predict(neg).any()


def test_lda_orthogonal_directions_do_not_matter(rng):
    pos = rng.standard_normal((30, 3)) + 1.0
    lda = fit_lda(pos, rng.standard_normal((30, 3)) - 1.0)
    d = rng.standard_normal((20, 3))
    w = lda.weights
    ortho = np.cross(w, rng.standard_normal(3))
    assert_allclose(lda.margin(d + ortho), lda.margin(d), atol=1e-10)


def test_lda_errors(rng):
    v = rng.standard_normal((10, 2))
    with pytest.raises(DegenerateClassifierError):
        fit_lda(v, v)
    with pytest.raises(ParameterError):
        fit_lda(v[:1], -v[:1])
    with pytest.raises(ParameterError):
        LdaClassifier(np.array([np.nan]), 0.0)


def test_decode_tie_and_antisymmetry(rng):
    X, Y = _coupled(rng)
    model = fit_cca(X, Y)
    d = rng.standard_normal((30, model.n_comp))
    lda = fit_lda(d + 0.5, -(d + 0.5))
    decision, margin = decode_cca_design(model, lda, X, Y, Y)
    assert decision == "A" and margin == pytest.approx(lda.bias)
    other = rng.standard_normal(Y.shape)
    _, forward = decode_cca_design(model, lda, X, Y, other)
    _, backward = decode_cca_design(model, lda, X, other, Y)
    assert backward == pytest.approx(-forward)


def test_decode_scale_invariant(small_participant):
    trials = small_participant.trials
    model, lda = train_cca_decoder([trial_design(t, ENV) for t in trials[:4]], 1e-2, eeg_lags=EEG_LAGS,
                                   feature_lags=FEATURE_LAGS, channels=trials[0].eeg.channels, kind=ENV)
    trial = trials[4]
    eeg = MultiSignal(trial.eeg.channels, trial.eeg.data[:, :640], 64.0)
    a = FeatureSignal(Signal(trial.feat_attended[ENV].samples[:640], 64.0), ENV)
    b = FeatureSignal(Signal(trial.feat_ignored[ENV].samples[:640], 64.0), ENV)
    scaled_a = FeatureSignal(Signal(3.0 * a.samples, 64.0), ENV)
    scaled_b = FeatureSignal(Signal(0.2 * b.samples, 64.0), ENV)
    first = decode_cca(model, lda, eeg, a, b)
    second = decode_cca(model, lda, eeg, scaled_a, scaled_b)
    assert first[0] == second[0]
    assert first[1] == pytest.approx(second[1], abs=1e-9)


def test_difference_vectors_shape(small_participant):
    designs = [trial_design(t, ENV) for t in small_participant.trials[:2]]
    model, _ = train_cca_decoder(designs, 1e-2, n_comp=3)
    diffs = difference_vectors(model, designs, 320)
    # 40 s por ensaio -> 8 segmentos de 5 s
    assert diffs.shape == (16, 3)


def test_cca_decoder_on_held_out_trials(small_participant):
    trials = small_participant.trials
    model, lda = train_cca_decoder([trial_design(t, ENV) for t in trials[:4]], 1e-2)
    correct = total = 0
    seg = 30 * 64
    for trial in trials[4:]:
        design = trial_design(trial, ENV)
        for start in range(0, design.X.shape[0] - seg + 1, 64):
            sl = slice(start, start + seg)
            decision, _ = decode_cca_design(model, lda, design.X[sl], design.attended[sl], design.ignored[sl])
            correct += decision == "A"
            total += 1
    assert total == 22
    assert correct / total > 0.8
