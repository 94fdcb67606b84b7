import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.signals import (FirFilter, MultiSignal, Signal, apply_fir, design_highpass_sinc, magnitude_response,
                          preprocess_eeg, rational_ratio, resample, standardize, xcorr_align)
from utils.errors import AlignmentError, DegenerateSignalError, LengthError, ParameterError


@pytest.fixture(scope="module")
def highpass():
    return design_highpass_sinc(0.5, 1691, 256.0)


def test_signal_rejects_bad_input():
    with pytest.raises(ParameterError):
        Signal([0.0, np.nan], 64.0)
    with pytest.raises(ParameterError):
        Signal([0.0, 1.0], 0.0)
    with pytest.raises(ParameterError):
        MultiSignal(("a", "a"), np.zeros((2, 4)), 64.0)


def test_highpass_design(highpass):
    assert highpass.coefficients.size == 1692
    assert abs(highpass.coefficients.sum()) < 1e-10
    gain_db = 20 * np.log10(magnitude_response(highpass, [0.25])[0])
    assert gain_db <= -6.0
    assert magnitude_response(highpass, [10.0])[0] == pytest.approx(1.0, abs=0.01)


def test_highpass_symmetry_even_order():
    fir = design_highpass_sinc(0.5, 100, 256.0)
    h = fir.coefficients
    assert np.max(np.abs(h - h[::-1])) < 1e-12


@pytest.mark.parametrize("cutoff,order", [(0.0, 100), (128.0, 100), (0.5, 1)])
def test_highpass_invalid(cutoff, order):
    with pytest.raises(ParameterError):
        design_highpass_sinc(cutoff, order, 256.0)


def test_apply_identity_and_impulse(rng):
    x = Signal(rng.standard_normal(50), 64.0)
    ident = FirFilter([1.0], 1.0, 0, 64.0)
    assert_allclose(apply_fir(ident, x).samples, x.samples)

    fir = design_highpass_sinc(2.0, 20, 64.0)
    impulse = np.zeros(64)
    impulse[0] = 1.0
    out = apply_fir(fir, Signal(impulse, 64.0)).samples
    assert_allclose(out[:21], fir.coefficients, atol=1e-15)
    assert_allclose(out[21:], 0.0, atol=1e-15)


def test_apply_too_short():
    fir = design_highpass_sinc(2.0, 20, 64.0)
    with pytest.raises(LengthError):
        apply_fir(fir, Signal(np.ones(15), 64.0))


def test_apply_linearity(rng):
    fir = design_highpass_sinc(2.0, 40, 64.0)
    x, y = rng.standard_normal(300), rng.standard_normal(300)
    lhs = apply_fir(fir, Signal(2.0 * x - 3.0 * y, 64.0)).samples
    rhs = 2.0 * apply_fir(fir, Signal(x, 64.0)).samples - 3.0 * apply_fir(fir, Signal(y, 64.0)).samples
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_compensated_sine_keeps_amplitude_and_phase(highpass):
    fs = 256.0
    t = np.arange(int(60 * fs)) / fs
    x = np.sin(2 * np.pi * 10 * t)
    y = apply_fir(highpass, Signal(x, fs), compensate_delay=True).samples
    middle = slice(2000, len(t) - 2000)
    amplitude = np.sqrt(2 * np.mean(y[middle] ** 2))
    assert amplitude == pytest.approx(1.0, rel=0.01)
    # fase via projeção em seno/cosseno
    s, c = np.sin(2 * np.pi * 10 * t[middle]), np.cos(2 * np.pi * 10 * t[middle])
    phase = np.arctan2(np.dot(y[middle], c), np.dot(y[middle], s))
    assert abs(phase) / (2 * np.pi * 10) * fs < 1.0


def test_resample_lengths_and_ratio():
    assert rational_ratio(44100.0, 64.0) == (16, 11025)
    out = resample(Signal(np.zeros(1024), 256.0), 64.0)
    assert len(out) == 256 and out.fs == 64.0
    with pytest.raises(ParameterError):
        rational_ratio(1.0, np.pi)


def test_resample_sine_amplitude():
    fs = 256.0
    t = np.arange(int(20 * fs)) / fs
    out = resample(Signal(np.sin(2 * np.pi * 5 * t), fs), 64.0)
    tt = np.arange(len(out)) / 64.0
    middle = slice(64, len(out) - 64)
    design = np.column_stack([np.sin(2 * np.pi * 5 * tt[middle]), np.cos(2 * np.pi * 5 * tt[middle])])
    coef, *_ = np.linalg.lstsq(design, out.samples[middle], rcond=None)
    assert np.hypot(*coef) == pytest.approx(1.0, rel=0.01)


def test_resample_round_trip(rng):
    fs = 256.0
    t = np.arange(int(30 * fs)) / fs
    x = sum(np.sin(2 * np.pi * f * t + p) for f, p in zip((1.0, 3.0, 7.0), rng.uniform(0, 6, 3)))
    back = resample(resample(Signal(x, fs), 64.0), fs).samples
    middle = slice(512, len(x) - 512)
    err = np.sqrt(np.mean((back[middle] - x[middle]) ** 2) / np.mean(x[middle] ** 2))
    assert err < 0.01


def test_standardize(rng):
    x = rng.standard_normal(500) * 3 + 2
    z = standardize(Signal(x, 64.0)).samples
    assert abs(z.mean()) < 1e-10 and abs(z.std() - 1) < 1e-10
    assert_allclose(standardize(Signal(5 * x - 1, 64.0)).samples, z, atol=1e-10)
    assert_allclose(standardize(Signal(z, 64.0)).samples, z, atol=1e-10)
    with pytest.raises(DegenerateSignalError):
        standardize(Signal(np.full(10, 3.0), 64.0))


def test_standardize_multichannel(rng):
    m = MultiSignal(("a", "b"), rng.standard_normal((2, 200)) * [[2.0], [5.0]], 64.0)
    z = standardize(m).data
    assert_allclose(z.mean(axis=1), 0.0, atol=1e-10)
    assert_allclose(z.std(axis=1), 1.0, atol=1e-10)


def test_xcorr_align(rng):
    x = rng.standard_normal(4000)
    assert xcorr_align(Signal(x, 64.0), Signal(x, 64.0), 200) == 0
    delayed = np.concatenate([np.zeros(100), x[:-100]])
    assert xcorr_align(Signal(delayed, 64.0), Signal(x, 64.0), 200) == 100


def test_xcorr_align_noisy(rng):
    x = rng.standard_normal(6000)
    for shift in (0, 17, 150):
        recorded = np.concatenate([np.zeros(shift), x[:len(x) - shift]]) + rng.standard_normal(len(x))
        assert xcorr_align(Signal(recorded, 64.0), Signal(x, 64.0), 150) == shift


def test_xcorr_align_errors():
    with pytest.raises(ParameterError):
        xcorr_align(Signal(np.ones(10), 64.0), Signal(np.ones(10), 32.0), 2)
    with pytest.raises(AlignmentError):
        xcorr_align(Signal(np.ones(10), 64.0), Signal(np.ones(10), 64.0), 3)


def test_preprocess_eeg(rng):
    raw = MultiSignal(("l", "r"), rng.standard_normal((2, 256 * 20)) + 50.0, 256.0)
    out = preprocess_eeg(raw)
    assert out.fs == 64.0 and len(out) == 64 * 20
    assert_allclose(out.data.std(axis=1), 1.0, atol=1e-10)
