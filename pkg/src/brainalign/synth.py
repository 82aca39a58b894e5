"""Synthetic ground truth: planted hierarchies, pseudo-models, raw recordings.

A teacher tensor is built as a mixing chain (each layer is an orthogonal
transform of the previous one blended with fresh noise), simulated electrodes
read out one planted teacher layer chosen by their distance bin, and
pseudo-models are noisy, optionally layer-delayed copies of the teacher. Every
artifact is deterministic given the plant seed; per-electrode and per-layer
draws use derived seeds so generation order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .iodata import FULL, ElectrodeMeta, EmbeddingTensor, ResponseMatrix
from .signal import RecordingTrace, WordTiming

MIXING_RATE = 0.7


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def monotone_assignment(n_bins: int, n_layers: int, lo_frac: float = 0.1, hi_frac: float = 0.9) -> dict[int, int]:
    """Bin -> layer map rising linearly through the interior of the layer range.

    The span avoids the first and last layers so center-of-mass truncation at
    the edges does not flatten the planted gradient.
    """
    lo = max(1, int(round(lo_frac * n_layers)))
    hi = min(n_layers, int(round(hi_frac * n_layers)))
    layers = np.linspace(lo, hi, n_bins)
    return {b: int(round(layers[b])) for b in range(n_bins)}


@dataclass
class PlantSpec:
    n_layers: int = 32
    n_words: int = 2000
    n_dims: int = 128
    n_electrodes: int = 200
    layer_assignment: dict[int, int] = field(default_factory=dict)
    noise_sigma: float = 0.0
    seed: int = 0
    dist_range_mm: tuple[float, float] = (0.0, 100.0)
    bin_width_mm: float = 10.0
    monotone: bool = True

    def __post_init__(self):
        if min(self.n_layers, self.n_words, self.n_dims, self.n_electrodes) < 1:
            raise ValueError("sizes must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        lo, hi = self.dist_range_mm
        if not 0 <= lo < hi:
            raise ValueError(f"bad distance range {self.dist_range_mm}")
        if not self.layer_assignment:
            n_bins = int(np.ceil((hi - lo) / self.bin_width_mm))
            self.layer_assignment = monotone_assignment(n_bins, self.n_layers)
        for b, layer in self.layer_assignment.items():
            if not 1 <= layer <= self.n_layers:
                raise ValueError(f"bin {b}: planted layer {layer} outside [1, {self.n_layers}]")
        if self.monotone:
            ordered = [self.layer_assignment[b] for b in sorted(self.layer_assignment)]
            if any(ordered[i] > ordered[i + 1] for i in range(len(ordered) - 1)):
                raise ValueError("layer_assignment must be non-decreasing in bin index")


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def generate_teacher(spec: PlantSpec, model_id: str = "teacher") -> EmbeddingTensor:
    """Correlated layer chain: layer l+1 = rho * (layer l)Q + sqrt(1-rho^2) * fresh."""
    rng = _rng(spec.seed, 0)
    layers = np.empty((spec.n_layers, spec.n_words, spec.n_dims))
    layers[0] = rng.standard_normal((spec.n_words, spec.n_dims))
    fresh_scale = np.sqrt(1.0 - MIXING_RATE**2)
    for i in range(1, spec.n_layers):
        q = random_orthogonal(spec.n_dims, rng)
        layers[i] = MIXING_RATE * (layers[i - 1] @ q) + fresh_scale * rng.standard_normal(
            (spec.n_words, spec.n_dims)
        )
    return EmbeddingTensor(
        model_id=model_id, context_window=FULL, data=layers, word_ids=np.arange(spec.n_words)
    )


REGION_BANDS = ("HG", "STG", "SUBCENTRAL", "IFG")  # by rising distance quartile


def _region_for(dist: float, lo: float, hi: float) -> str:
    frac = (dist - lo) / (hi - lo)
    return REGION_BANDS[min(3, int(frac * 4))]


def electrode_distances(spec: PlantSpec) -> np.ndarray:
    lo, hi = spec.dist_range_mm
    return _rng(spec.seed, 1).uniform(lo, hi, size=spec.n_electrodes)


def generate_brain(
    spec: PlantSpec,
    teacher: EmbeddingTensor,
    context_signal: np.ndarray | None = None,
    context_threshold_frac: float = 0.5,
) -> tuple[ResponseMatrix, list[ElectrodeMeta]]:
    """Simulated word responses: each electrode reads out its bin's planted layer.

    When a context signal is given, electrodes past context_threshold_frac of
    the distance range additionally read it with a weight rising linearly to 1,
    so only deep hierarchy stages depend on context.
    """
    if teacher.n_layers != spec.n_layers or teacher.n_words != spec.n_words:
        raise ValueError("teacher shape does not match spec")
    lo, hi = spec.dist_range_mm
    dists = electrode_distances(spec)
    values = np.empty((spec.n_electrodes, spec.n_words))
    metas = []
    for e in range(spec.n_electrodes):
        rng = _rng(spec.seed, 2, e)
        w = rng.standard_normal(spec.n_dims)
        w /= np.linalg.norm(w)
        bin_idx = int(np.floor(dists[e] / spec.bin_width_mm))
        if bin_idx not in spec.layer_assignment:
            bin_idx = min(spec.layer_assignment, key=lambda b: abs(b - bin_idx))
        layer = spec.layer_assignment[bin_idx]
        resp = teacher.layer(layer - 1).astype(np.float64) @ w
        if context_signal is not None:
            gate = max(0.0, (dists[e] - lo) / (hi - lo) - context_threshold_frac) / (
                1.0 - context_threshold_frac
            )
            resp = resp + gate * context_signal
        if spec.noise_sigma > 0:
            resp = resp + spec.noise_sigma * rng.standard_normal(spec.n_words)
        values[e] = resp
        metas.append(
            ElectrodeMeta(
                electrode_id=f"E{e:03d}",
                subject_id=f"S{e % 8 + 1:02d}",
                dist_pmhg_mm=float(dists[e]),
                region=_region_for(dists[e], lo, hi),
                lag_ms=float(dists[e] * 4.0),
                responsive=True,
                t_value=10.0,
            )
        )
    matrix = ResponseMatrix(
        values=values, word_ids=teacher.word_ids.copy(), electrode_ids=[m.electrode_id for m in metas]
    )
    return matrix, metas


# ---------------------------------------------------------------------------
# Pseudo-models: noisy, delayed, context-gated copies of the teacher
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoModelSpec:
    model_id: str
    quality: float  # doubles as the benchmark score, in (0, 1]
    layer_delay: int = 0
    noise_scale: float = 0.0
    context_gain: float = 0.0

    def __post_init__(self):
        if not 0 < self.quality <= 1:
            raise ValueError("quality must lie in (0, 1]")
        if self.layer_delay < 0 or self.noise_scale < 0 or self.context_gain < 0:
            raise ValueError("delay, noise and gain must be non-negative")


def default_pseudo_models(n: int = 3) -> list[PseudoModelSpec]:
    """Quality-ordered family: better models are cleaner, less delayed, more contextual."""
    if n == 1:
        # single-model worlds are for plant-recovery checks: keep it pristine
        return [PseudoModelSpec(model_id="modelA", quality=0.95, layer_delay=0,
                                noise_scale=0.0, context_gain=1.0)]
    qualities = np.linspace(0.35, 0.85, n)
    out = []
    for i, q in enumerate(qualities):
        out.append(
            PseudoModelSpec(
                model_id=f"model{chr(ord('A') + i)}",
                quality=float(q),
                layer_delay=2 * (n - 1 - i),
                noise_scale=float(1.8 * (1.0 - q)),
                context_gain=float(1.5 * q),
            )
        )
    return out


def generate_context_signal(spec: PlantSpec) -> np.ndarray:
    return _rng(spec.seed, 3).standard_normal(spec.n_words)


def context_alpha(window: int | str) -> float:
    """Fraction of contextual content available at a context-window setting."""
    if window == FULL:
        return 1.0
    if window <= 1:
        return 0.0
    return min(1.0, np.log(window) / np.log(100.0))


def generate_pseudo_model(
    spec: PlantSpec,
    teacher: EmbeddingTensor,
    model: PseudoModelSpec,
    model_index: int,
    context_window: int | str = FULL,
    context_signal: np.ndarray | None = None,
) -> EmbeddingTensor:
    """Pseudo-model tensor at one context-window setting.

    The teacher copy and the additive noise do not depend on the window, so
    window pairs differ only in how much of the context signal they carry.
    """
    alpha = context_alpha(context_window)
    layers = np.empty((spec.n_layers, spec.n_words, spec.n_dims))
    for i in range(spec.n_layers):
        src = max(0, i - model.layer_delay)
        layer = teacher.layer(src).astype(np.float64).copy()
        if context_signal is not None and model.context_gain > 0 and alpha > 0:
            direction = _rng(spec.seed, 4, i).standard_normal(spec.n_dims)
            direction /= np.linalg.norm(direction)
            layer += alpha * model.context_gain * np.outer(context_signal, direction)
        if model.noise_scale > 0:
            layer += model.noise_scale * _rng(spec.seed, 5, model_index, i).standard_normal(
                (spec.n_words, spec.n_dims)
            )
        layers[i] = layer
    return EmbeddingTensor(
        model_id=model.model_id,
        context_window=context_window,
        data=layers,
        word_ids=teacher.word_ids.copy(),
    )


# ---------------------------------------------------------------------------
# Raw-recording world for the preprocessing stage
# ---------------------------------------------------------------------------

@dataclass
class RawWorldSpec:
    n_electrodes: int = 16
    n_responsive: int = 10
    n_passages: int = 8
    passage_s: float = 8.0
    silence_s: float = 3.0
    words_per_passage: int = 12
    fs_hz: float = 1000.0
    carrier_hz: float = 110.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.n_responsive <= self.n_electrodes:
            raise ValueError("n_responsive outside [0, n_electrodes]")
        if self.silence_s < 1.5 or self.passage_s < 2.0:
            raise ValueError("passages need >= 2 s speech and >= 1.5 s silence")


def raw_word_timings(spec: RawWorldSpec) -> list[WordTiming]:
    words = []
    wid = 0
    for p in range(spec.n_passages):
        block = p * (spec.silence_s + spec.passage_s)
        onset = block + spec.silence_s
        usable = spec.passage_s - 1.0  # keep word windows off the passage edges
        for i in range(spec.words_per_passage):
            center = onset + 0.5 + usable * (i + 0.5) / spec.words_per_passage
            words.append(
                WordTiming(
                    word_id=wid,
                    center_s=round(center, 4),
                    passage_id=p,
                    passage_onset_s=onset,
                    preceding_silence_end_s=onset,
                )
            )
            wid += 1
    return words


def generate_raw_world(spec: RawWorldSpec) -> tuple[list[RecordingTrace], list[WordTiming], list[ElectrodeMeta]]:
    """Amplitude-modulated in-band carriers: responsive electrodes double their
    envelope during speech; the rest stay flat. Noise keeps the paired test
    honest for the flat electrodes."""
    duration = spec.n_passages * (spec.silence_s + spec.passage_s) + 1.0
    n = int(round(duration * spec.fs_hz))
    t = np.arange(n) / spec.fs_hz
    speech_mask = np.zeros(n)
    for p in range(spec.n_passages):
        onset = p * (spec.silence_s + spec.passage_s) + spec.silence_s
        lo = int(round(onset * spec.fs_hz))
        hi = int(round((onset + spec.passage_s) * spec.fs_hz))
        speech_mask[lo:hi] = 1.0
    traces = []
    metas = []
    for e in range(spec.n_electrodes):
        rng = _rng(spec.seed, 6, e)
        responsive = e < spec.n_responsive
        amplitude = 1.0 + (1.0 if responsive else 0.0) * speech_mask
        carrier = np.sin(2.0 * np.pi * spec.carrier_hz * t + rng.uniform(0, 2 * np.pi))
        samples = amplitude * carrier + 0.05 * rng.standard_normal(n)
        traces.append(RecordingTrace(samples=samples, fs_hz=spec.fs_hz, electrode_id=f"R{e:03d}"))
        metas.append(
            ElectrodeMeta(
                electrode_id=f"R{e:03d}",
                subject_id=f"S{e % 4 + 1:02d}",
                dist_pmhg_mm=float(5.0 + 3.0 * e),
                region="OTHER",
            )
        )
    return traces, raw_word_timings(spec), metas
