"""Acceptance gate: one test per release criterion, at the stated tolerances.

Each test prints a single ACCEPTANCE line (visible with -s or on failure).
Known-unattainable bound: the independence baseline of plug-in CKA at
n=200/d=50 sits near 0.20 analytically, so the <= 0.15 check fails by
construction; see the decisions ledger for the analysis. It is asserted
faithfully here rather than weakened.
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from brainalign import cli
from brainalign.encoding import encode_model, ridge_cv_score
from brainalign.hierarchy import DIST_PMHG, bin_electrodes, compute_alignment
from brainalign.iodata import FULL, EmbeddingTensor, aggregate_benchmarks
from brainalign.signal import RecordingTrace, highgamma_envelope
from brainalign.similarity import LINEAR, RBF, cka, contextual_content, layer_similarity_matrix
from brainalign.stats import holm_correct
from brainalign.synth import PlantSpec, generate_brain, generate_teacher
from test_stats import brute_force_holm


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# --------------------------------------------------------------------------
# Published-benchmark aggregation (runtime < 1 s)
# --------------------------------------------------------------------------

PUBLISHED_BENCHMARKS = [
    ("Galactica-6.7B", 0.486, 0.535, 0.511),
    ("CerebrasGPT-6.7B", 0.565, 0.575, 0.570),
    ("Pythia-6.9B", 0.568, 0.597, 0.582),
    ("OPT-6.7B", 0.581, 0.616, 0.598),
    ("FairseqDense-6.7B", 0.575, 0.628, 0.602),
    ("LeoLM-7B", 0.634, 0.646, 0.640),
    ("MPT-7B", 0.620, 0.665, 0.643),
    ("Falcon-7B", 0.619, 0.669, 0.644),
    ("LLaMA-7B", 0.626, 0.674, 0.650),
    ("LLaMA2-7B", 0.639, 0.671, 0.655),
    ("XwinLM-7B", 0.648, 0.673, 0.660),
    ("Mistral-7B", 0.669, 0.703, 0.686),
]


def test_benchmark_aggregation():
    t0 = time.monotonic()
    worst = max(
        abs(aggregate_benchmarks(rc, cr) - published) for _, rc, cr, published in PUBLISHED_BENCHMARKS
    )
    elapsed = time.monotonic() - t0
    _report(
        "benchmark-aggregation",
        worst <= 5e-4 + 1e-12 and elapsed < 1.0,
        f"12 models, max deviation {worst:.2e}, {elapsed:.2f}s",
    )


# --------------------------------------------------------------------------
# Signal oracle (runtime < 10 s)
# --------------------------------------------------------------------------

def test_signal_oracle():
    t0 = time.monotonic()
    fs = 1000.0
    t = np.arange(int(20 * fs)) / fs
    modulator = 1.0 + 0.5 * np.sin(2 * np.pi * 2.0 * t)
    env = highgamma_envelope(RecordingTrace(modulator * np.sin(2 * np.pi * 100.0 * t), fs))
    mod_ds = 1.0 + 0.5 * np.sin(2 * np.pi * 2.0 * np.arange(env.samples.size) / 100.0)
    r = np.corrcoef(env.samples[20:-20], mod_ds[20:-20])[0, 1]

    out_band = highgamma_envelope(RecordingTrace(np.sin(2 * np.pi * 10.0 * t), fs))
    attenuation = np.max(out_band.samples[10:-10])
    elapsed = time.monotonic() - t0
    _report(
        "signal-oracle",
        r >= 0.99 and attenuation <= 0.05 and elapsed < 10.0,
        f"AM r={r:.4f}, out-of-band peak {attenuation:.4f}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# Holm oracle (runtime < 5 s)
# --------------------------------------------------------------------------

def test_holm_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = rng.integers(1, 13)
        p = np.round(rng.uniform(0, 1, size=m), 3)  # ties are common after rounding
        a_fast, r_fast = holm_correct(p, alpha=0.05)
        a_ref, r_ref = brute_force_holm(p, alpha=0.05)
        assert np.array_equal(a_fast, a_ref) and np.array_equal(r_fast, r_ref)
    elapsed = time.monotonic() - t0
    _report("holm-oracle", elapsed < 5.0, f"1000 random p-vectors exact, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Ridge oracle (runtime < 60 s)
# --------------------------------------------------------------------------

def test_ridge_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(1)
    X = rng.standard_normal((500, 10))
    planted = ridge_cv_score(X, X @ rng.standard_normal(10), lambdas=[1e-6, 1e-3, 1.0])

    Xn = rng.standard_normal((1000, 50))
    null = ridge_cv_score(Xn, rng.standard_normal(1000))

    snr_scores = []
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        Xs = r.standard_normal((1000, 20))
        sig = Xs @ r.standard_normal(20)
        sig /= sig.std()
        snr_scores.append(ridge_cv_score(Xs, sig + np.sqrt(3.0) * r.standard_normal(1000)))
    snr = float(np.mean(snr_scores))
    elapsed = time.monotonic() - t0
    _report(
        "ridge-oracle",
        planted >= 0.999 and abs(null) <= 0.1 and abs(snr - 0.5) <= 0.1 and elapsed < 60.0,
        f"planted {planted:.4f}, null {null:+.4f}, SNR mean {snr:.3f} (target 0.5), {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# CKA invariance suite (runtime < 60 s)
# --------------------------------------------------------------------------

def test_cka_invariance():
    t0 = time.monotonic()
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 20))
    Y = rng.standard_normal((80, 14))
    Q, _ = np.linalg.qr(rng.standard_normal((20, 20)))

    self_err = max(abs(cka(X, X, LINEAR) - 1.0), abs(cka(X, X, RBF) - 1.0))
    rot_err = abs(cka(X, X @ Q, LINEAR) - 1.0)
    scale_err = abs(cka(2.5 * X, -0.3 * Y, LINEAR) - cka(X, Y, LINEAR))
    sym_err = max(
        abs(cka(X, Y, LINEAR) - cka(Y, X, LINEAR)), abs(cka(X, Y, RBF) - cka(Y, X, RBF))
    )
    elapsed = time.monotonic() - t0
    _report(
        "cka-invariance",
        self_err <= 1e-6 and rot_err <= 1e-9 and scale_err <= 1e-9 and sym_err <= 1e-12
        and elapsed < 60.0,
        f"self {self_err:.1e}, rotation {rot_err:.1e}, scaling {scale_err:.1e}, "
        f"symmetry {sym_err:.1e}, {elapsed:.1f}s",
    )


def test_cka_null_bound():
    # Stated criterion: null CKA <= 0.15 at n=200, d=50 over 20 seeds. The
    # plug-in estimator mandated elsewhere has an independence baseline of
    # (d/n)/(1+d/n) = 0.20 at these sizes, so this bound cannot hold; the
    # assertion is kept faithful and the analysis lives in the decisions
    # ledger. The debiased estimator that would pass is explicitly excluded.
    t0 = time.monotonic()
    vals = [
        cka(
            np.random.default_rng(s).standard_normal((200, 50)),
            np.random.default_rng(777 + s).standard_normal((200, 50)),
            LINEAR,
        )
        for s in range(20)
    ]
    worst = max(vals)
    elapsed = time.monotonic() - t0
    _report(
        "cka-null-bound",
        worst <= 0.15 and elapsed < 60.0,
        f"max null CKA {worst:.3f} vs bound 0.15 (plug-in baseline 0.20; see ledger), {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# Planted-offset detection (runtime < 120 s at 32 layers / 2000 words)
# --------------------------------------------------------------------------

def test_planted_offset_detection():
    t0 = time.monotonic()
    spec = PlantSpec(n_layers=32, n_words=2000, n_dims=128, n_electrodes=4, seed=0)
    teacher = generate_teacher(spec)
    shifted = EmbeddingTensor(
        model_id="shifted",
        context_window=FULL,
        data=np.roll(teacher.data, 3, axis=0),
        word_ids=teacher.word_ids,
    )
    matrix = layer_similarity_matrix(teacher, shifted, kernel=RBF, max_words=2000)
    hits = np.argmax(matrix.values, axis=1) == (np.arange(32) + 3) % 32
    frac = float(np.mean(hits))
    elapsed = time.monotonic() - t0
    _report(
        "planted-offset",
        frac >= 0.90 and elapsed < 120.0,
        f"row argmax matches plant for {frac:.0%} of rows, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# Hierarchy plant recovery (CLI end-to-end < 300 s at 32/2000/200)
# --------------------------------------------------------------------------

def test_hierarchy_plant_recovery(tmp_path):
    t0 = time.monotonic()
    world = tmp_path / "desk"
    assert cli.main(["synth", "--out", str(world), "--seed", "0", "--n-models", "1"]) == 0
    cfg_path = str(world / "config.yaml")
    assert cli.main(["encode", "--config", cfg_path]) == 0
    assert cli.main(["hierarchy", "--config", cfg_path]) == 0
    cli_elapsed = time.monotonic() - t0
    report = json.loads((world / "out" / "hierarchy" / "alignment_modelA_DIST_PMHG.json").read_text())
    clean_r = report["alignment_r"]

    noisy_rs = []
    for seed in range(10):
        spec = PlantSpec(seed=seed, noise_sigma=1.0)
        teacher = generate_teacher(spec)
        responses, metas = generate_brain(spec, teacher)
        enc = encode_model(teacher, responses, k=500)
        rep, _ = compute_alignment(bin_electrodes(metas, DIST_PMHG, 10.0), enc)
        noisy_rs.append(rep.alignment_r)
    noisy_mean = float(np.mean(noisy_rs))

    const_spec = PlantSpec(seed=0, layer_assignment={b: 15 for b in range(10)}, monotone=False)
    teacher = generate_teacher(const_spec)
    responses, metas = generate_brain(const_spec, teacher)
    enc = encode_model(teacher, responses, k=500)
    from brainalign.config import PipelineConfig
    from brainalign.pipeline import _alignment_block

    block = _alignment_block(PipelineConfig(), metas, enc, DIST_PMHG)
    degenerate = bool(block["degenerate"])
    elapsed = time.monotonic() - t0
    _report(
        "hierarchy-plant",
        clean_r >= 0.99 and cli_elapsed < 300.0 and noisy_mean >= 0.8 and degenerate,
        f"clean r={clean_r:.4f} (CLI {cli_elapsed:.0f}s), sigma=1 mean r={noisy_mean:.4f}, "
        f"constant plant degenerate={degenerate}, total {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# Contextual-content contract (runtime < 60 s)
# --------------------------------------------------------------------------

def test_contextual_content_contract():
    t0 = time.monotonic()
    rng = np.random.default_rng(3)
    base = rng.standard_normal((200, 16))
    identical = contextual_content(
        EmbeddingTensor("m", FULL, np.repeat(base[np.newaxis], 6, axis=0), np.arange(200)),
        EmbeddingTensor("m", 1, base[np.newaxis].copy(), np.arange(200)),
        kernel=LINEAR,
    ).value

    layers = []
    for _ in range(6):
        Q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
        layers.append(base @ Q)
    rotated = contextual_content(
        EmbeddingTensor("m", FULL, np.stack(layers), np.arange(200)),
        EmbeddingTensor("m", 1, base[np.newaxis].copy(), np.arange(200)),
        kernel=LINEAR,
    ).value

    independent = contextual_content(
        EmbeddingTensor("m", FULL, rng.standard_normal((6, 200, 16)), np.arange(200)),
        EmbeddingTensor("m", 1, rng.standard_normal((1, 200, 16)), np.arange(200)),
        kernel=RBF,
    ).value
    elapsed = time.monotonic() - t0
    _report(
        "contextual-content",
        identical == 0.0 and abs(rotated) <= 1e-9 and independent >= 0.85 and elapsed < 60.0,
        f"identical {identical}, rotated {rotated:.1e}, independent {independent:.3f}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# Determinism: byte-identical reports on rerun (runtime < pipeline x 2)
# --------------------------------------------------------------------------

def _tree_hashes(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_cli_determinism(tmp_path):
    t0 = time.monotonic()
    world = tmp_path / "world"
    args = ["--layers", "8", "--words", "200", "--dims", "16", "--electrodes", "40",
            "--n-models", "4", "--context", "1,10,full"]
    assert cli.main(["synth", "--out", str(world), "--seed", "5", *args]) == 0
    commands = ("preprocess", "encode", "hierarchy", "cka", "context", "report")
    for cmd in commands:
        assert cli.main([cmd, "--config", str(world / "config.yaml")]) == 0
    first = _tree_hashes(world / "out")
    for cmd in commands:
        assert cli.main([cmd, "--config", str(world / "config.yaml")]) == 0
    second = _tree_hashes(world / "out")
    identical = first == second
    elapsed = time.monotonic() - t0
    _report(
        "cli-determinism",
        identical and len(first) > 10,
        f"{len(first)} report files byte-identical across rerun of all commands, {elapsed:.0f}s",
    )
