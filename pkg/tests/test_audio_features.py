import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singsep.audio_features import (
    AudioClip,
    F0Contour,
    MagSpectrogram,
    VocoderFeatures,
    f0_dequantize,
    f0_denormalize,
    f0_normalize,
    f0_quantize,
    load_feature_dump,
    load_wav,
    mcd,
    mcd_frames,
    save_feature_dump,
    save_wav,
    stft_magnitude,
    vocoder_analyze,
    vocoder_synthesize,
)
from singsep.audio_features import codec
from singsep.audio_features.pitch import bin_centers, bin_width_cents, cents
from singsep.audio_features.vocoder import PulseNoiseVocoder
from singsep.dataset.synth import steady_vowel
from singsep.exceptions import AnalysisError, DataError, ResampleRequiredError, UsageError

from . import oracles

FS = 32000


def sine(freq, n, amp=1.0):
    return AudioClip(amp * np.sin(2 * np.pi * freq * np.arange(n) / FS))


# stft ----------------------------------------------------------------------


def test_640ms_gives_128_frames():
    m = stft_magnitude(AudioClip(np.random.default_rng(0).normal(size=20480) * 0.1))
    assert m.values.shape == (128, 513)


def test_zero_clip_zero_magnitude():
    assert not stft_magnitude(AudioClip(np.zeros(4000))).values.any()


def test_sine_peaks_at_closed_form_bin():
    m = stft_magnitude(sine(1000.0, 32000))
    # frames whose window lies inside the clip; the last few see the reflected end
    inside = (32000 - 1024) // 160 + 1
    assert np.all(m.values[:inside].argmax(axis=1) == round(1000 * 1024 / 32000))


def test_stft_rejects_other_rates():
    with pytest.raises(ResampleRequiredError):
        stft_magnitude(AudioClip(np.zeros(1600), 16000))


@settings(max_examples=25, deadline=None)
@given(st.integers(160, 6000), st.floats(0.01, 20.0))
def test_stft_frame_count_and_scale_covariance(n, g):
    x = np.random.default_rng(n).uniform(-0.5, 0.5, size=n)
    m1 = stft_magnitude(AudioClip(x)).values
    m2 = stft_magnitude(AudioClip(g * x)).values
    assert m1.shape == (n // 160, 513)
    assert np.all(m1 >= 0)
    np.testing.assert_allclose(m2, g * m1, rtol=1e-12, atol=1e-12)


def test_mag_spectrogram_rejects_bad_shape():
    with pytest.raises(ValueError):
        MagSpectrogram(np.zeros((4, 512)))


# vocoder -------------------------------------------------------------------


def test_steady_vowel_f0_within_10_cents():
    x, truth = steady_vowel(220.0, "a", duration=0.8, seed=1)
    feats, f0 = vocoder_analyze(AudioClip(x))
    sustained = np.flatnonzero(truth > 0)[10:-10]
    est = f0.to_hz()[sustained]
    assert np.all(est > 0)
    assert np.abs(cents(est, 220.0)).max() <= 10.0


def test_silence_is_unvoiced():
    feats, f0 = vocoder_analyze(AudioClip(np.zeros(8000)))
    assert not f0.voiced.any()
    assert feats.values.shape == (50, 64)
    assert np.all(np.isfinite(feats.values))


def test_analysis_shape_for_640ms():
    x, _ = steady_vowel(300.0, "o", duration=0.64, seed=0)
    feats, f0 = vocoder_analyze(AudioClip(x[:20480]))
    assert feats.values.shape == (128, 64)
    assert f0.n_frames == 128


@pytest.mark.parametrize("n", [160, 161, 1599, 3200, 20479, 20480])
def test_analysis_and_stft_frame_counts_agree(n):
    clip = AudioClip(np.random.default_rng(n).normal(size=n) * 0.1)
    feats, f0 = vocoder_analyze(clip)
    assert feats.n_frames == f0.n_frames == stft_magnitude(clip).n_frames


def test_backend_failure_names_backend():
    class Broken:
        name = "broken-backend"
        fft_size = 4096

        def analyze(self, x, fs, n_frames):
            raise RuntimeError("boom")

    with pytest.raises(AnalysisError, match="broken-backend"):
        vocoder_analyze(AudioClip(np.zeros(3200)), backend=Broken())


def test_synthesis_length_is_frames_times_hop():
    x, _ = steady_vowel(200.0, "e", duration=0.64, seed=2)
    feats, f0 = vocoder_analyze(AudioClip(x[:20480]))
    y = vocoder_synthesize(feats, f0)
    assert len(y) == 128 * 160
    assert np.all(np.isfinite(y.samples))


def test_synthesis_frame_mismatch():
    feats = VocoderFeatures(np.zeros((10, 64)))
    with pytest.raises(DataError):
        vocoder_synthesize(feats, np.full(9, 200.0))


def _peak_to_floor_db(samples):
    spec = np.abs(np.fft.rfft(samples * np.hanning(len(samples)))) ** 2
    band = spec[50 : len(spec) // 4]
    return 10 * np.log10(band.max() / np.median(band))


def test_unvoiced_synthesis_has_no_harmonic_peaks():
    x, _ = steady_vowel(220.0, "a", duration=0.8, seed=4)
    feats, f0 = vocoder_analyze(AudioClip(x))
    voiced = vocoder_synthesize(feats, f0).samples[3200:22400]
    unvoiced = vocoder_synthesize(feats, np.zeros(feats.n_frames)).samples[3200:22400]
    assert _peak_to_floor_db(unvoiced) < _peak_to_floor_db(voiced) - 10.0


def test_synthesis_is_seeded():
    x, _ = steady_vowel(250.0, "u", duration=0.4, seed=5)
    feats, f0 = vocoder_analyze(AudioClip(x))
    a = vocoder_synthesize(feats, f0, PulseNoiseVocoder(seed=3)).samples
    b = vocoder_synthesize(feats, f0, PulseNoiseVocoder(seed=3)).samples
    np.testing.assert_array_equal(a, b)


def test_codec_flat_envelope_round_trip():
    power = np.full((3, 2049), 4.0)
    cep = codec.encode_envelope(power)
    assert cep.shape == (3, 60)
    np.testing.assert_allclose(cep[:, 0], np.log(2.0), atol=1e-9)
    np.testing.assert_allclose(cep[:, 1:], 0.0, atol=1e-9)
    np.testing.assert_allclose(codec.decode_envelope(cep, 2049), 4.0, rtol=1e-9)


def test_codec_aperiodicity_bands():
    ap = np.full((2, 2049), 10 ** (-20 / 10))
    bands = codec.encode_aperiodicity(ap)
    np.testing.assert_allclose(bands, -20.0, atol=1e-6)
    np.testing.assert_allclose(codec.decode_aperiodicity(bands, 2049), ap, rtol=1e-6)


# f0 representations --------------------------------------------------------


def test_normalize_endpoints_and_midpoint():
    lo, hi = 65.4, 1046.5
    c = f0_normalize([lo, hi, math.sqrt(lo * hi), 0.0], lo, hi)
    np.testing.assert_allclose(c.values, [0.0, 1.0, 0.5, 0.0], atol=1e-12)
    assert c.voiced.tolist() == [True, True, True, False]


def test_normalize_clips_out_of_range():
    c = f0_normalize([30.0, 3000.0])
    assert c.values.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("fmin,fmax", [(0.0, 100.0), (-5.0, 100.0), (200.0, 100.0)])
def test_normalize_bad_range(fmin, fmax):
    with pytest.raises(UsageError):
        f0_normalize([100.0], fmin, fmax)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(65.4, 1046.5), min_size=1, max_size=20))
def test_normalize_inverse_identity(f0):
    back = f0_denormalize(f0_normalize(f0))
    np.testing.assert_allclose(back, f0, rtol=1e-9)


def test_quantize_bin_centres_and_unvoiced():
    centers = bin_centers()
    c = f0_quantize(np.concatenate([[0.0], centers]))
    assert c.values.tolist() == list(range(256))
    assert c.voiced[0] == False  # noqa: E712
    with pytest.raises(UsageError):
        f0_quantize([100.0], n_bins=1)


def test_quantize_round_trip_within_half_bin():
    f0 = np.geomspace(65.4, 1046.5, 5000)
    back = f0_dequantize(f0_quantize(f0))
    assert np.abs(cents(back, f0)).max() <= bin_width_cents() / 2 + 1e-9


def test_contour_to_hz_dispatches_on_mode():
    f0 = np.array([0.0, 110.0, 440.0])
    np.testing.assert_allclose(f0_normalize(f0).to_hz(), f0, rtol=1e-12)
    q = f0_quantize(f0).to_hz()
    assert q[0] == 0.0 and np.abs(cents(q[1:], f0[1:])).max() < 10


def test_contour_rejects_unknown_mode():
    with pytest.raises(ValueError):
        F0Contour(np.zeros(3), np.zeros(3, bool), mode="mel")


# mcd -----------------------------------------------------------------------


def test_mcd_identical_is_exactly_zero():
    x = np.random.default_rng(0).normal(size=(40, 64))
    assert mcd(x, x) == (0.0, 0.0)


def test_mcd_unit_difference_closed_form():
    ref = np.zeros((1, 64))
    est = ref.copy()
    est[0, 7] = 1.0
    mean, std = mcd(ref, est)
    assert mean == pytest.approx(10 / math.log(10) * math.sqrt(2), abs=1e-12)
    assert mean == pytest.approx(6.1421, abs=1e-3)
    assert std == 0.0


def test_mcd_ignores_energy_and_aperiodicity():
    ref = np.zeros((5, 64))
    est = ref.copy()
    est[:, 0] = 3.0
    est[:, 60:] = -12.0
    assert mcd(ref, est) == (0.0, 0.0)


def test_mcd_matches_loop_oracle_and_is_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(6, 64)), rng.normal(size=(6, 64))
    expected = [oracles.mcd_frame(a[i].tolist(), b[i].tolist()) for i in range(6)]
    np.testing.assert_allclose(mcd_frames(a, b), expected, rtol=1e-12)
    assert mcd(a, b) == pytest.approx(mcd(b, a))


def test_mcd_shape_mismatch():
    with pytest.raises(DataError):
        mcd(np.zeros((3, 64)), np.zeros((4, 64)))


# io ------------------------------------------------------------------------


def test_wav_round_trip_and_resample(tmp_path):
    from scipy.io import wavfile

    clip = sine(440.0, 3200, 0.5)
    save_wav(tmp_path / "a.wav", clip)
    back = load_wav(tmp_path / "a.wav")
    assert back.sample_rate == FS
    np.testing.assert_allclose(back.samples, clip.samples, atol=1 / 32768)

    stereo = (np.stack([np.ones(1600), np.zeros(1600)], axis=1) * 16384).astype(np.int16)
    wavfile.write(tmp_path / "b.wav", 16000, stereo)
    down = load_wav(tmp_path / "b.wav")
    assert len(down) == 3200
    assert down.samples[400:2800] == pytest.approx(0.25, abs=1e-3)


def test_load_wav_bad_file(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"not a wav")
    with pytest.raises(DataError):
        load_wav(tmp_path / "x.wav")


def test_feature_dump_round_trip(tmp_path):
    x = np.random.default_rng(1).normal(size=(17, 64)).astype(np.float32)
    save_feature_dump(tmp_path / "f.ssfd", x, layout="mcep60+bap4")
    back, header = load_feature_dump(tmp_path / "f.ssfd", expect_layout="mcep60+bap4")
    np.testing.assert_array_equal(back, x)
    assert header["shape"] == [17, 64]
    assert header["hop"] == pytest.approx(0.005)
    assert header["sample_rate"] == 32000
    with pytest.raises(DataError):
        load_feature_dump(tmp_path / "f.ssfd", expect_layout="other")


def test_audio_clip_invariants():
    with pytest.raises(ValueError):
        AudioClip(np.zeros((2, 10)))
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, np.nan]))
    assert AudioClip(np.zeros(32000)).duration == 1.0
