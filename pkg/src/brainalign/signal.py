"""Neural signal preprocessing: band envelope, word responses, responsiveness.

The 70-150 Hz band is isolated with a zero-phase forward-backward Butterworth
filter (4th order per pass) so envelope timing is unbiased, the envelope is the
magnitude of the analytic signal, and downsampling uses polyphase anti-alias
resampling. Word windows are inclusive on both ends: at 100 Hz a 100 ms window
holds 11 samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as dsp
from scipy import stats as sps

from .iodata import atomic_write_bytes
from .stats import holm_correct


@dataclass
class RecordingTrace:
    samples: np.ndarray
    fs_hz: float
    electrode_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("trace samples must be 1-D")
        if self.samples.size == 0:
            raise ValueError("empty trace")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite samples in trace")
        self.fs_hz = float(self.fs_hz)
        if self.fs_hz <= 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs_hz}")

    @property
    def duration_s(self) -> float:
        """Time of the last sample (sample i sits at i / fs_hz seconds)."""
        return (self.samples.size - 1) / self.fs_hz


@dataclass
class WordTiming:
    word_id: int
    center_s: float
    passage_id: int
    passage_onset_s: float
    preceding_silence_end_s: float

    def __post_init__(self):
        if self.center_s < 0:
            raise ValueError(f"word {self.word_id}: center_s must be non-negative")
        if self.passage_onset_s > self.center_s:
            raise ValueError(f"word {self.word_id}: passage onset after word center")


WORD_TIMING_COLUMNS = ["word_id", "center_s", "passage_id", "passage_onset_s", "preceding_silence_end_s"]


def read_word_timings(path) -> list[WordTiming]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != WORD_TIMING_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(WORD_TIMING_COLUMNS)}, got {reader.fieldnames}")
        return [
            WordTiming(
                word_id=int(row["word_id"]),
                center_s=float(row["center_s"]),
                passage_id=int(row["passage_id"]),
                passage_onset_s=float(row["passage_onset_s"]),
                preceding_silence_end_s=float(row["preceding_silence_end_s"]),
            )
            for row in reader
        ]


def write_word_timings(words: list[WordTiming], path) -> None:
    lines = [",".join(WORD_TIMING_COLUMNS)]
    for w in words:
        lines.append(
            f"{w.word_id},{w.center_s!r},{w.passage_id},{w.passage_onset_s!r},{w.preceding_silence_end_s!r}"
        )
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def highgamma_envelope(
    trace: RecordingTrace,
    band_lo_hz: float = 70.0,
    band_hi_hz: float = 150.0,
    out_fs_hz: float = 100.0,
) -> RecordingTrace:
    """Band-limited analytic-signal magnitude, resampled to out_fs_hz."""
    if not 0 < band_lo_hz < band_hi_hz:
        raise ValueError(f"bad band ({band_lo_hz}, {band_hi_hz})")
    if trace.fs_hz <= 2.0 * band_hi_hz:
        raise ValueError(
            f"sampling rate {trace.fs_hz} Hz too low for a {band_hi_hz} Hz band edge"
        )
    sos = dsp.butter(4, [band_lo_hz, band_hi_hz], btype="bandpass", fs=trace.fs_hz, output="sos")
    banded = dsp.sosfiltfilt(sos, trace.samples)
    env = np.abs(dsp.hilbert(banded))
    if out_fs_hz != trace.fs_hz:
        ratio = Fraction(trace.fs_hz / out_fs_hz).limit_denominator(1000)
        if abs(float(ratio) - trace.fs_hz / out_fs_hz) > 1e-9:
            raise ValueError(f"cannot resample {trace.fs_hz} Hz to {out_fs_hz} Hz with a rational factor")
        env = dsp.resample_poly(env, up=ratio.denominator, down=ratio.numerator)
    env = np.maximum(env, 0.0)  # polyphase filtering can undershoot slightly
    return RecordingTrace(samples=env, fs_hz=out_fs_hz, electrode_id=trace.electrode_id)


def window_mean(trace: RecordingTrace, center_s: float, width_s: float) -> float:
    """Mean of samples with timestamps in [center - width/2, center + width/2]."""
    half = width_s / 2.0
    lo = int(np.ceil((center_s - half) * trace.fs_hz - 1e-9))
    hi = int(np.floor((center_s + half) * trace.fs_hz + 1e-9))
    if lo < 0 or hi >= trace.samples.size:
        raise ValueError(
            f"window [{center_s - half:.3f}, {center_s + half:.3f}] s extends beyond the recording"
        )
    return float(trace.samples[lo : hi + 1].mean())


def word_responses(
    envelope: RecordingTrace, words: list[WordTiming], window_ms: float = 100.0
) -> np.ndarray:
    """Mean envelope in a window around each word midpoint; one value per word."""
    if not words:
        raise ValueError("no words given")
    out = np.empty(len(words), dtype=np.float64)
    for i, w in enumerate(words):
        try:
            out[i] = window_mean(envelope, w.center_s, window_ms / 1000.0)
        except ValueError as exc:
            raise ValueError(f"word {w.word_id}: {exc}") from exc
    return out


@dataclass(frozen=True)
class ResponsivenessResult:
    t_values: np.ndarray
    p_values: np.ndarray  # raw, per electrode
    p_adjusted: np.ndarray  # Holm-corrected across electrodes
    responsive: np.ndarray  # bool


def responsiveness_test(
    speech_samples: np.ndarray, silence_samples: np.ndarray, alpha: float = 0.05
) -> ResponsivenessResult:
    """Paired t-test (speech vs preceding silence, paired by passage) per electrode.

    Inputs are (n_electrodes, n_passages) arrays of the per-passage mean
    envelope in the first second of speech and the last second of silence.
    P-values are Holm-corrected across electrodes.
    """
    speech = np.atleast_2d(np.asarray(speech_samples, dtype=np.float64))
    silence = np.atleast_2d(np.asarray(silence_samples, dtype=np.float64))
    if speech.shape != silence.shape:
        raise ValueError(f"speech/silence shape mismatch: {speech.shape} vs {silence.shape}")
    n_pass = speech.shape[1]
    if n_pass < 2:
        raise ValueError(f"need at least 2 passages, got {n_pass}")
    diff = speech - silence
    mean = diff.mean(axis=1)
    sd = diff.std(axis=1, ddof=1)
    t = np.zeros_like(mean)
    nonzero = sd > 0
    t[nonzero] = mean[nonzero] / (sd[nonzero] / np.sqrt(n_pass))
    # zero spread: t=0 when the means agree too, +-inf otherwise
    t[~nonzero & (mean != 0)] = np.inf * np.sign(mean[~nonzero & (mean != 0)])
    p = 2.0 * sps.t.sf(np.abs(t), n_pass - 1)
    p[np.isinf(t)] = 0.0
    p_adj, reject = holm_correct(p, alpha=alpha)
    return ResponsivenessResult(t_values=t, p_values=p, p_adjusted=p_adj, responsive=reject)
