import numpy as np
import pytest

from brainalign.signal import (
    RecordingTrace,
    WordTiming,
    highgamma_envelope,
    read_word_timings,
    responsiveness_test,
    window_mean,
    word_responses,
    write_word_timings,
)


def tone(freq, fs, duration, amplitude=1.0, phase=0.0):
    t = np.arange(int(duration * fs)) / fs
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def test_envelope_in_band_tone_recovers_amplitude():
    amp = 2.0
    trace = RecordingTrace(tone(100.0, 1000.0, 10.0, amp), 1000.0)
    env = highgamma_envelope(trace)
    assert env.fs_hz == 100.0
    core = env.samples[10:-10]  # discard 100 ms per edge
    assert np.all(np.abs(core - amp) < 0.02 * amp)


def test_envelope_out_of_band_tone_suppressed():
    amp = 1.5
    trace = RecordingTrace(tone(10.0, 1000.0, 10.0, amp), 1000.0)
    env = highgamma_envelope(trace)
    assert np.max(env.samples[10:-10]) <= 0.05 * amp


def test_envelope_demodulates_am():
    fs = 1000.0
    t = np.arange(int(20 * fs)) / fs
    modulator = 1.0 + 0.5 * np.sin(2 * np.pi * 2.0 * t)
    trace = RecordingTrace(modulator * np.sin(2 * np.pi * 100.0 * t), fs)
    env = highgamma_envelope(trace)
    mod_ds = 1.0 + 0.5 * np.sin(2 * np.pi * 2.0 * np.arange(env.samples.size) / 100.0)
    lo, hi = 20, env.samples.size - 20
    r = np.corrcoef(env.samples[lo:hi], mod_ds[lo:hi])[0, 1]
    assert r >= 0.99


def test_envelope_sign_flip_invariant(rng):
    x = rng.standard_normal(4000)
    a = highgamma_envelope(RecordingTrace(x, 1000.0))
    b = highgamma_envelope(RecordingTrace(-x, 1000.0))
    scale = np.max(np.abs(a.samples)) + 1e-30
    assert np.max(np.abs(a.samples - b.samples)) / scale < 1e-6


def test_envelope_band_outside_nyquist():
    with pytest.raises(ValueError, match="too low"):
        highgamma_envelope(RecordingTrace(np.zeros(100), 250.0))


def word(wid, center, passage=0, onset=0.0, silence_end=0.0):
    return WordTiming(wid, center, passage, onset, silence_end)


def test_word_responses_constant_envelope():
    env = RecordingTrace(np.full(500, 3.25), 100.0)
    words = [word(0, 1.0), word(1, 2.5), word(2, 4.0)]
    assert word_responses(env, words) == pytest.approx([3.25, 3.25, 3.25])


def test_word_responses_linear_ramp():
    # samples are exactly t; the mean over 0.95..1.05 s is 1.0
    env = RecordingTrace(np.arange(300) / 100.0, 100.0)
    assert word_responses(env, [word(0, 1.0)])[0] == pytest.approx(1.0, abs=1e-12)


def test_word_window_is_inclusive_eleven_samples():
    samples = np.zeros(300)
    samples[95:106] = 1.0  # exactly the inclusive window
    samples[94] = 100.0
    samples[106] = 100.0
    env = RecordingTrace(samples, 100.0)
    assert word_responses(env, [word(7, 1.0)])[0] == pytest.approx(1.0)


def test_word_at_zero_errors_with_id():
    env = RecordingTrace(np.zeros(300), 100.0)
    with pytest.raises(ValueError, match="word 9"):
        word_responses(env, [word(9, 0.0)])


def test_word_responses_linearity(rng):
    samples = np.abs(rng.standard_normal(500))
    words = [word(i, 1.0 + 0.5 * i) for i in range(6)]
    base = word_responses(RecordingTrace(samples, 100.0), words)
    scaled = word_responses(RecordingTrace(2.5 * samples + 1.25, 100.0), words)
    assert scaled == pytest.approx(2.5 * base + 1.25, abs=1e-12)


def test_window_mean_inclusive_bounds():
    env = RecordingTrace(np.arange(10.0), 1.0)
    # center 2 s, width 2 s -> samples at 1, 2, 3
    assert window_mean(env, 2.0, 2.0) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# responsiveness
# ---------------------------------------------------------------------------

def test_responsiveness_zero_differences():
    speech = np.tile([1.0, 2.0, 3.0, 4.0], (2, 1))
    res = responsiveness_test(speech, speech.copy())
    assert res.t_values == pytest.approx([0.0, 0.0])
    assert not res.responsive.any()


def test_responsiveness_strong_effect(rng):
    silence = rng.normal(5.0, 0.1, size=(3, 20))
    speech = silence + 10.0 + rng.normal(0, 0.1, size=(3, 20))
    res = responsiveness_test(speech, silence)
    assert res.responsive.all()
    assert np.all(res.t_values > 50)


def test_responsiveness_mixed_with_holm(rng):
    n_pass = 20
    silence = rng.normal(1.0, 0.5, size=(4, n_pass))
    speech = silence + rng.normal(0, 0.5, size=(4, n_pass))
    speech[1] += 5.0  # only electrode 1 responds
    res = responsiveness_test(speech, silence)
    assert list(res.responsive) == [False, True, False, False]
    assert np.all(res.p_adjusted >= res.p_values - 1e-15)


def test_responsiveness_permutation_consistent(rng):
    speech = rng.normal(2.0, 1.0, size=(5, 10))
    silence = rng.normal(1.0, 1.0, size=(5, 10))
    res = responsiveness_test(speech, silence)
    perm = [3, 0, 4, 1, 2]
    res_p = responsiveness_test(speech[perm], silence[perm])
    assert res_p.t_values == pytest.approx(res.t_values[perm])
    assert np.array_equal(res_p.responsive, res.responsive[perm])


def test_responsiveness_needs_two_passages():
    with pytest.raises(ValueError, match="2 passages"):
        responsiveness_test(np.ones((2, 1)), np.ones((2, 1)))


def test_responsiveness_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        responsiveness_test(np.ones((2, 3)), np.ones((2, 4)))


def test_word_timing_csv_round_trip(tmp_path):
    words = [
        WordTiming(0, 3.5, 0, 3.0, 3.0),
        WordTiming(1, 4.25, 0, 3.0, 3.0),
        WordTiming(2, 14.0, 1, 13.0, 13.0),
    ]
    path = tmp_path / "words.csv"
    write_word_timings(words, path)
    assert read_word_timings(path) == words
