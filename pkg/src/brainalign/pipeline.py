"""Pipeline commands: each consumes config + files, emits CSVs and a JSON summary.

Every summary embeds the resolved config and sha256 of the inputs it consumed,
all floats are serialized with repr (shortest round-trip), and files are
written atomically, so reruns with the same inputs and seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import encoding, hierarchy, signal, similarity, stats, synth
from .config import ConfigError, PipelineConfig, dump_config
from .iodata import (
    FULL,
    BenchmarkScores,
    ElectrodeMeta,
    EmbeddingTensor,
    ResponseMatrix,
    atomic_write_bytes,
    read_benchmarks,
    read_electrodes,
    read_responses,
    read_tensor,
    read_tensor_header,
    write_benchmarks,
    write_electrodes,
    write_responses,
    write_tensor,
)
from .signal import RecordingTrace
from .stats import ZeroVarianceError, significance_stars

REGION_ORDER = ["HG", "STG", "SUBCENTRAL", "IFG"]


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------

def _sanitize(obj):
    """JSON-ready copy: numpy scalars unboxed, non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    text = json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(header: list[str], rows: list[list], path) -> None:
    def cell(v) -> str:
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(cfg: PipelineConfig, inputs: list) -> dict:
    return {
        "config": _sanitize(cfg.as_dict()),
        "inputs": {str(p): sha256_file(p) for p in sorted(str(q) for q in inputs)},
        "seed": cfg.seed,
    }


def _outdir(cfg: PipelineConfig, stage: str) -> Path:
    d = Path(cfg.output_dir) / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


def _corr_block(res: stats.CorrelationResult) -> dict:
    return {"r": res.r, "p": res.p, "n": res.n, "method": res.method, "stars": significance_stars(res.p)}


# ---------------------------------------------------------------------------
# Input discovery and shared loaders
# ---------------------------------------------------------------------------

def window_tag(window) -> str:
    return FULL if window == FULL else str(window)


def discover_tensors(tensors_dir) -> dict[tuple[str, object], Path]:
    """Map (model_id, context_window) -> path by scanning NMT1 headers."""
    out: dict[tuple[str, object], Path] = {}
    for path in sorted(Path(tensors_dir).glob("*.nmt1")):
        header = read_tensor_header(path)
        key = (header["model_id"], header["context_window"])
        if key in out:
            raise ConfigError(f"duplicate tensor for {key}: {path} and {out[key]}")
        out[key] = path
    if not out:
        raise ConfigError(f"no .nmt1 tensors found in {tensors_dir}")
    return out


def select_models(available: list[str], models_filter: str | None) -> list[str]:
    if not models_filter:
        return sorted(available)
    wanted = [m.strip() for m in models_filter.split(",") if m.strip()]
    missing = [m for m in wanted if m not in available]
    if missing:
        raise ConfigError(f"models not found: {missing}; available: {sorted(available)}")
    return sorted(wanted)


def load_responsive(cfg: PipelineConfig) -> tuple[ResponseMatrix, list[ElectrodeMeta]]:
    """Responses restricted to speech-responsive electrodes, in response row order."""
    metas = {m.electrode_id: m for m in read_electrodes(cfg.electrodes)}
    responses = read_responses(cfg.responses)
    keep = [i for i, e in enumerate(responses.electrode_ids) if e in metas and metas[e].responsive]
    if not keep:
        raise ConfigError("no responsive electrodes in the response matrix")
    sub = ResponseMatrix(
        values=responses.values[keep],
        word_ids=responses.word_ids,
        electrode_ids=[responses.electrode_ids[i] for i in keep],
    )
    return sub, [metas[e] for e in sub.electrode_ids]


def load_performance(cfg: PipelineConfig) -> dict[str, BenchmarkScores] | None:
    if cfg.benchmarks is None or not Path(cfg.benchmarks).exists():
        return None
    return read_benchmarks(cfg.benchmarks)


# ---------------------------------------------------------------------------
# Encoding results on disk
# ---------------------------------------------------------------------------

def scores_csv_path(cfg: PipelineConfig, model_id: str) -> Path:
    return _outdir(cfg, "encode") / f"scores_{model_id}.csv"


def write_scores_csv(enc: encoding.EncodingResult, path) -> None:
    rows = []
    for i, e in enumerate(enc.electrode_ids):
        for layer in range(enc.n_layers):
            rows.append([e, layer + 1, enc.scores[i, layer]])
    write_csv(["electrode_id", "layer", "score"], rows, path)


def read_scores_csv(path, model_id: str, context_window=FULL) -> encoding.EncodingResult:
    by_electrode: dict[str, dict[int, float]] = {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != ["electrode_id", "layer", "score"]:
            raise ConfigError(f"{path}: unexpected scores header {header}")
        for line in f:
            e, layer, score = line.rstrip("\n").split(",")
            by_electrode.setdefault(e, {})[int(layer)] = float(score)
    electrode_ids = list(by_electrode)
    n_layers = max(max(d) for d in by_electrode.values())
    scores = np.full((len(electrode_ids), n_layers), np.nan)
    for i, e in enumerate(electrode_ids):
        for layer, s in by_electrode[e].items():
            scores[i, layer - 1] = s
    return encoding.EncodingResult(
        model_id=model_id, scores=scores, context_window=context_window, electrode_ids=electrode_ids
    )


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def cmd_preprocess(cfg: PipelineConfig) -> dict:
    cfg.require("raw_dir", "raw_electrodes", "word_timings")
    metas = read_electrodes(cfg.raw_electrodes)
    words = read_word_timings_checked(cfg.word_timings)
    passages = sorted({(w.passage_id, w.passage_onset_s, w.preceding_silence_end_s) for w in words})
    if len(passages) < 2:
        raise ConfigError(f"need at least 2 passages for the responsiveness test, got {len(passages)}")
    raw_paths = []
    rows = []
    speech = np.empty((len(metas), len(passages)))
    silence = np.empty((len(metas), len(passages)))
    for i, meta in enumerate(metas):
        path = Path(cfg.raw_dir) / f"{meta.electrode_id}.nmt1"
        if not path.exists():
            raise ConfigError(f"missing raw trace for electrode {meta.electrode_id}: {path}")
        raw_paths.append(path)
        t = read_tensor(path)
        trace = RecordingTrace(
            samples=t.data[0, :, 0].astype(np.float64), fs_hz=cfg.raw_fs_hz, electrode_id=meta.electrode_id
        )
        env = signal.highgamma_envelope(
            trace, band_lo_hz=cfg.band_lo_hz, band_hi_hz=cfg.band_hi_hz, out_fs_hz=cfg.envelope_fs_hz
        )
        rows.append(signal.word_responses(env, words, window_ms=cfg.window_ms))
        for p, (_, onset, silence_end) in enumerate(passages):
            speech[i, p] = signal.window_mean(env, onset + 0.5, 1.0)
            silence[i, p] = signal.window_mean(env, silence_end - 0.5, 1.0)
    result = signal.responsiveness_test(speech, silence, alpha=cfg.alpha)
    updated = []
    for i, meta in enumerate(metas):
        updated.append(
            ElectrodeMeta(
                electrode_id=meta.electrode_id,
                subject_id=meta.subject_id,
                dist_pmhg_mm=meta.dist_pmhg_mm,
                region=meta.region,
                lag_ms=meta.lag_ms,
                responsive=bool(result.responsive[i]),
                t_value=float(result.t_values[i]),
            )
        )
    out = _outdir(cfg, "preprocess")
    matrix = ResponseMatrix(
        values=np.vstack(rows),
        word_ids=np.array([w.word_id for w in words]),
        electrode_ids=[m.electrode_id for m in metas],
    )
    write_responses(matrix, out / "responses.nmt1")
    write_electrodes(updated, out / "electrodes.csv")
    summary = {
        "stage": "preprocess",
        "n_electrodes": len(metas),
        "n_responsive": int(result.responsive.sum()),
        "n_passages": len(passages),
        "n_words": len(words),
        "electrodes": [
            {
                "electrode_id": m.electrode_id,
                "t_value": result.t_values[i],
                "p_raw": result.p_values[i],
                "p_adjusted": result.p_adjusted[i],
                "responsive": bool(result.responsive[i]),
            }
            for i, m in enumerate(metas)
        ],
        "provenance": provenance(cfg, [cfg.raw_electrodes, cfg.word_timings] + raw_paths),
    }
    write_json(summary, out / "summary.json")
    return summary


def read_word_timings_checked(path) -> list[signal.WordTiming]:
    words = signal.read_word_timings(path)
    if not words:
        raise ConfigError(f"{path}: no word timings")
    ids = [w.word_id for w in words]
    if sorted(set(ids)) != ids:
        raise ConfigError(f"{path}: word_id column must be strictly increasing")
    return words


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------

def _encode_one(
    cfg: PipelineConfig, path, responses: ResponseMatrix
) -> encoding.EncodingResult:
    from .iodata import align_words

    tensor = read_tensor(path)
    t, r = align_words(tensor, responses)
    return encoding.encode_model(t, r, k=cfg.pca_k, n_folds=cfg.n_folds, lambdas=cfg.lambdas)


def cmd_encode(cfg: PipelineConfig, models: str | None = None) -> dict:
    cfg.require("tensors_dir", "responses", "electrodes")
    responses, metas = load_responsive(cfg)
    tensors = discover_tensors(cfg.tensors_dir)
    full_models = [m for (m, w) in tensors if w == FULL]
    selected = select_models(full_models, models)
    if not selected:
        raise ConfigError("no full-context tensors to encode")
    perf = load_performance(cfg)
    out = _outdir(cfg, "encode")
    dist_by_id = {m.electrode_id: m.dist_pmhg_mm for m in metas}

    def run(model_id: str):
        return _encode_one(cfg, tensors[(model_id, FULL)], responses)

    results: dict[str, encoding.EncodingResult] = {}
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            for model_id, enc in zip(selected, pool.map(run, selected)):
                results[model_id] = enc
    else:
        for model_id in selected:
            results[model_id] = run(model_id)

    model_summaries = {}
    mean_peak_scores = {}
    mean_peak_layers = {}
    for model_id in selected:
        enc = results[model_id]
        write_scores_csv(enc, scores_csv_path(cfg, model_id))
        peaks = encoding.peak_stats(enc)
        valid = peaks.valid
        mean_peak_scores[model_id] = float(np.mean(peaks.peak_score[valid]))
        mean_peak_layers[model_id] = float(np.mean(peaks.peak_layer[valid]))
        dists = np.array([dist_by_id[e] for e in enc.electrode_ids])
        window_n = min(cfg.sliding_window_n, int(valid.sum()))
        if valid.sum() >= 2:
            d_sorted, smoothed = encoding.sliding_peak_layer(
                peaks.peak_layer[valid].astype(np.float64), dists[valid], window_n=window_n
            )
            write_csv(
                ["dist_pmhg_mm", "smoothed_peak_layer"],
                [[d_sorted[i], smoothed[i]] for i in range(d_sorted.size)],
                out / f"curve_{model_id}.csv",
            )
        model_summaries[model_id] = {
            "mean_peak_score": mean_peak_scores[model_id],
            "mean_peak_layer": mean_peak_layers[model_id],
            "n_electrodes": int(valid.sum()),
            "n_excluded_electrodes": int((~valid).sum()),
            "nan_cells": int(np.sum(~np.isfinite(enc.scores))),
        }

    correlations = {}
    warnings_list = []
    if perf is None:
        warnings_list.append("benchmarks file missing; performance correlations omitted")
    else:
        known = [m for m in selected if m in perf]
        if len(known) >= 3:
            perf_v = [perf[m].llm_performance for m in known]
            correlations["peak_score_vs_performance"] = _corr_block(
                stats.pearson(perf_v, [mean_peak_scores[m] for m in known])
            )
            correlations["peak_layer_vs_performance"] = _corr_block(
                stats.pearson(perf_v, [mean_peak_layers[m] for m in known])
            )
        else:
            warnings_list.append(f"only {len(known)} models with benchmark scores; correlations need 3")

    inputs = [cfg.responses, cfg.electrodes] + [tensors[(m, FULL)] for m in selected]
    if perf is not None:
        inputs.append(cfg.benchmarks)
    summary = {
        "stage": "encode",
        "models": model_summaries,
        "correlations": correlations,
        "warnings": warnings_list,
        "provenance": provenance(cfg, inputs),
    }
    write_json(summary, out / "summary.json")
    return summary


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------

def _alignment_block(
    cfg: PipelineConfig, metas: list[ElectrodeMeta], enc: encoding.EncodingResult, axis: str
) -> dict:
    width = cfg.bin_width_mm if axis == hierarchy.DIST_PMHG else cfg.bin_width_ms
    binning = hierarchy.bin_electrodes(metas, axis, width)
    try:
        report, profiles = hierarchy.compute_alignment(binning, enc)
    except (ZeroVarianceError, ValueError) as exc:
        return {"axis": axis, "degenerate": True, "reason": str(exc)}
    com_range = float(np.ptp(report.per_bin_com))
    return {
        "axis": axis,
        "alignment_r": report.alignment_r,
        "alignment_p": report.alignment_p,
        "stars": significance_stars(report.alignment_p),
        "bin_positions": report.bin_positions,
        "per_bin_com": report.per_bin_com,
        "bin_sizes": [len(ids) for (_, _, ids) in profiles.binning.bins],
        "n_excluded_electrodes": report.n_excluded_electrodes,
        "com_range": com_range,
        "degenerate": bool(com_range < cfg.degenerate_com_range),
        "_profiles": profiles,
    }


def _strip_private(block: dict) -> dict:
    return {k: v for k, v in block.items() if not k.startswith("_")}


def cmd_hierarchy(cfg: PipelineConfig, models: str | None = None) -> dict:
    cfg.require("responses", "electrodes")
    _, metas = load_responsive(cfg)
    enc_dir = Path(cfg.output_dir) / "encode"
    score_files = sorted(enc_dir.glob("scores_*.csv"))
    if not score_files:
        raise ConfigError(f"no encoding results under {enc_dir}; run encode first")
    available = [p.stem.removeprefix("scores_") for p in score_files]
    selected = select_models(available, models)
    perf = load_performance(cfg)
    out = _outdir(cfg, "hierarchy")

    axes = [hierarchy.DIST_PMHG]
    if any(m.lag_ms is not None for m in metas):
        axes.append(hierarchy.LAG)

    per_model: dict[str, dict] = {}
    for model_id in selected:
        enc = read_scores_csv(enc_dir / f"scores_{model_id}.csv", model_id)
        blocks = {}
        for axis in axes:
            block = _alignment_block(cfg, metas, enc, axis)
            profiles = block.pop("_profiles", None)
            if profiles is not None:
                n_layers = profiles.profiles.shape[1]
                write_csv(
                    ["bin_lower", "bin_upper", "n_electrodes"] + [f"layer_{i + 1}" for i in range(n_layers)],
                    [
                        [lo, hi, len(ids)] + list(profiles.profiles[i])
                        for i, (lo, hi, ids) in enumerate(profiles.binning.bins)
                    ],
                    out / f"profile_{model_id}_{axis}.csv",
                )
            blocks[axis] = block
            write_json(
                {"model_id": model_id, **_strip_private(block)},
                out / f"alignment_{model_id}_{axis}.json",
            )
        per_model[model_id] = blocks

    cross = {}
    for axis in axes:
        usable = [
            m for m in selected
            if not per_model[m][axis].get("degenerate") and perf is not None and m in perf
        ]
        if perf is None or len(usable) < 3:
            continue
        perf_v = np.array([perf[m].llm_performance for m in usable])
        align_v = np.array([per_model[m][axis]["alignment_r"] for m in usable])
        corr = stats.pearson(perf_v, align_v)
        data = np.column_stack([perf_v, align_v])
        try:
            ci = stats.bootstrap_ci(
                data,
                lambda d: stats.pearson(d[:, 0], d[:, 1]).r,
                n_resamples=cfg.bootstrap_n,
                level=cfg.bootstrap_level,
                seed=cfg.seed,
            )
            ci_block = {"lo": ci.lo, "hi": ci.hi, "n_resamples": ci.n_resamples, "level": ci.level}
        except ValueError as exc:
            ci_block = {"error": str(exc)}
        cross[axis] = {
            "alignment_vs_performance": _corr_block(corr),
            "bootstrap_ci": ci_block,
            "models": usable,
        }

    splits = {}
    subjects = sorted({m.subject_id for m in metas})
    groups = {"even": subjects[0::2], "odd": subjects[1::2]}
    for name, subj in groups.items():
        group_metas = [m for m in metas if m.subject_id in subj]
        block: dict = {"subjects": subj, "n_electrodes": len(group_metas)}
        per_model_r = {}
        for model_id in selected:
            enc = read_scores_csv(enc_dir / f"scores_{model_id}.csv", model_id)
            res = _alignment_block(cfg, group_metas, enc, hierarchy.DIST_PMHG)
            res.pop("_profiles", None)
            per_model_r[model_id] = _strip_private(res)
        block["per_model"] = per_model_r
        usable = [
            m for m in selected
            if perf is not None and m in perf and not per_model_r[m].get("degenerate")
        ]
        if perf is not None and len(usable) >= 3:
            block["alignment_vs_performance"] = _corr_block(
                stats.pearson(
                    [perf[m].llm_performance for m in usable],
                    [per_model_r[m]["alignment_r"] for m in usable],
                )
            )
        splits[name] = block

    inputs = [cfg.responses, cfg.electrodes] + list(score_files)
    if perf is not None:
        inputs.append(cfg.benchmarks)
    summary = {
        "stage": "hierarchy",
        "models": {m: {a: _strip_private(b) for a, b in blocks.items()} for m, blocks in per_model.items()},
        "cross_model": cross,
        "subject_splits": splits,
        "provenance": provenance(cfg, inputs),
    }
    write_json(summary, out / "summary.json")
    return summary


# ---------------------------------------------------------------------------
# cka
# ---------------------------------------------------------------------------

def cmd_cka(cfg: PipelineConfig, models: str | None = None) -> dict:
    cfg.require("tensors_dir")
    tensors = discover_tensors(cfg.tensors_dir)
    full_models = [m for (m, w) in tensors if w == FULL]
    selected = select_models(full_models, models)
    if len(selected) < 2:
        raise ConfigError(f"need at least 2 models for CKA comparisons, got {len(selected)}")
    perf = load_performance(cfg)
    out = _outdir(cfg, "cka")

    loaded = {m: read_tensor(tensors[(m, FULL)]) for m in selected}
    ref_ids = loaded[selected[0]].word_ids
    for m in selected[1:]:
        if not np.array_equal(loaded[m].word_ids, ref_ids):
            raise ConfigError(f"tensor word_ids differ between {selected[0]} and {m}")
    idx = similarity.subsample_indices(ref_ids.size, cfg.cka_max_words, cfg.seed)
    rule = f"{cfg.kernel};median*{cfg.bandwidth_scale};max_words={cfg.cka_max_words};seed={cfg.seed}"

    matrices: dict[tuple[str, str], similarity.SimilarityMatrix] = {}
    files = {}
    for i, ma in enumerate(selected):
        stack_a = similarity.gram_stack(loaded[ma], idx, cfg.kernel, cfg.bandwidth_scale)
        for mb in selected[i:]:
            stack_b = stack_a if mb == ma else similarity.gram_stack(
                loaded[mb], idx, cfg.kernel, cfg.bandwidth_scale
            )
            values = similarity.similarity_from_stacks(stack_a, stack_b)
            sim = similarity.SimilarityMatrix(
                model_a=ma, model_b=mb, values=values, kernel=cfg.kernel, rbf_bandwidth_rule=rule
            )
            matrices[(ma, mb)] = sim
            stem = f"sim_{ma}__{mb}"
            write_tensor(
                EmbeddingTensor(
                    model_id=f"{ma}__vs__{mb}",
                    context_window=FULL,
                    data=values[np.newaxis, :, :],
                    word_ids=np.arange(values.shape[0]),
                ),
                out / f"{stem}.nmt1",
            )
            write_json(
                {
                    "model_a": ma,
                    "model_b": mb,
                    "kernel": cfg.kernel,
                    "rbf_bandwidth_rule": rule,
                    "diagonal_similarity": similarity.diagonal_similarity(sim)
                    if values.shape[0] == values.shape[1]
                    else None,
                },
                out / f"{stem}.json",
            )
            files[f"{ma}__{mb}"] = f"{stem}.nmt1"

    order = sorted(selected, key=lambda m: (perf[m].llm_performance, m)) if perf else selected
    diag = {}
    for a in order:
        for b in order:
            key = (a, b) if (a, b) in matrices else (b, a)
            diag[(a, b)] = similarity.diagonal_similarity(matrices[key])
    write_csv(
        ["model"] + order,
        [[a] + [diag[(a, b)] for b in order] for a in order],
        out / "diagonal.csv",
    )

    diag_to_best = None
    best_corr = None
    if perf:
        best = order[-1]
        diag_to_best = {m: diag[(m, best)] for m in order}
        if len(order) >= 3:
            best_corr = _corr_block(
                stats.pearson(
                    [perf[m].llm_performance for m in order], [diag_to_best[m] for m in order]
                )
            )

    groups = {}
    group_warnings = []
    if perf and len(selected) >= 4:
        group_size = min(cfg.group_size, len(selected) // 2)
        labeling = similarity.label_groups(
            {m: perf[m].llm_performance for m in selected}, group_size=group_size
        )
        for pair_class in (similarity.TOP_TOP, similarity.TOP_BOTTOM, similarity.BOTTOM_BOTTOM):
            try:
                avg = similarity.group_average(list(matrices.values()), labeling, pair_class)
            except ValueError as exc:
                group_warnings.append(f"{pair_class}: {exc}")
                continue
            write_tensor(
                EmbeddingTensor(
                    model_id=f"group_{pair_class}",
                    context_window=FULL,
                    data=avg.values[np.newaxis, :, :],
                    word_ids=np.arange(avg.values.shape[0]),
                ),
                out / f"group_{pair_class}.nmt1",
            )
            write_csv(
                ["layer"] + [str(j + 1) for j in range(avg.values.shape[1])],
                [[i + 1] + list(avg.values[i]) for i in range(avg.values.shape[0])],
                out / f"group_{pair_class}.csv",
            )
            groups[pair_class] = {"n_pairs": int(avg.model_b.split("=")[1]), "file": f"group_{pair_class}.nmt1"}
        groups["labeling"] = labeling
    else:
        group_warnings.append("group averages need benchmark scores and at least 4 models")

    inputs = [tensors[(m, FULL)] for m in selected]
    if perf is not None:
        inputs.append(cfg.benchmarks)
    summary = {
        "stage": "cka",
        "kernel": cfg.kernel,
        "rbf_bandwidth_rule": rule,
        "n_matrices": len(matrices),
        "files": files,
        "model_order_by_performance": order,
        "diagonal": {f"{a}__{b}": diag[(a, b)] for a in order for b in order},
        "diagonal_to_best": diag_to_best,
        "diagonal_to_best_vs_performance": best_corr,
        "groups": groups,
        "warnings": group_warnings,
        "provenance": provenance(cfg, inputs),
    }
    write_json(summary, out / "summary.json")
    return summary


# ---------------------------------------------------------------------------
# context
# ---------------------------------------------------------------------------

def cmd_context(cfg: PipelineConfig, models: str | None = None, windows: list | None = None) -> dict:
    cfg.require("tensors_dir", "responses", "electrodes")
    responses, metas = load_responsive(cfg)
    tensors = discover_tensors(cfg.tensors_dir)
    full_models = [m for (m, w) in tensors if w == FULL]
    selected = select_models(full_models, models)
    perf = load_performance(cfg)
    wanted_windows = windows if windows is not None else cfg.context_windows
    out = _outdir(cfg, "context")
    region_by_id = {m.electrode_id: m.region for m in metas}
    dist_by_id = {m.electrode_id: m.dist_pmhg_mm for m in metas}
    warn_list = []

    def encode_at(model_id: str, window) -> encoding.EncodingResult:
        return _encode_one(cfg, tensors[(model_id, window)], responses)

    # window sweep: encode + alignment + cross-model correlation per window
    per_window = []
    enc_cache: dict[tuple[str, object], encoding.EncodingResult] = {}
    usable_windows = []
    for window in wanted_windows:
        missing = [m for m in selected if (m, window) not in tensors]
        if missing:
            warn_list.append(f"window {window_tag(window)} skipped; missing tensors for {missing}")
            continue
        usable_windows.append(window)
        for m in selected:
            enc = encode_at(m, window)
            enc_cache[(m, window)] = enc
            write_scores_csv(enc, out / f"scores_{m}_ctx{window_tag(window)}.csv")
    for window in usable_windows:
        aligns = {}
        for m in selected:
            block = _alignment_block(cfg, metas, enc_cache[(m, window)], hierarchy.DIST_PMHG)
            block.pop("_profiles", None)
            aligns[m] = block
        row: dict = {"window": window_tag(window), "per_model_alignment": {
            m: {k: aligns[m].get(k) for k in ("alignment_r", "alignment_p", "degenerate")} for m in selected
        }}
        usable = [m for m in selected if perf and m in perf and not aligns[m].get("degenerate")]
        if perf and len(usable) >= 3:
            perf_v = np.array([perf[m].llm_performance for m in usable])
            align_v = np.array([aligns[m]["alignment_r"] for m in usable])
            row["alignment_vs_performance"] = _corr_block(stats.pearson(perf_v, align_v))
            try:
                ci = stats.bootstrap_ci(
                    np.column_stack([perf_v, align_v]),
                    lambda d: stats.pearson(d[:, 0], d[:, 1]).r,
                    n_resamples=cfg.bootstrap_n,
                    level=cfg.bootstrap_level,
                    seed=cfg.seed,
                )
                row["bootstrap_ci"] = {"lo": ci.lo, "hi": ci.hi, "level": ci.level}
            except ValueError as exc:
                row["bootstrap_ci"] = {"error": str(exc)}
        per_window.append(row)

    # contextual content: full vs 1-token embeddings
    content = {}
    if FULL in usable_windows and 1 in usable_windows:
        for m in selected:
            full_t = read_tensor(tensors[(m, FULL)])
            one_t = read_tensor(tensors[(m, 1)])
            cc = similarity.contextual_content(
                full_t,
                one_t,
                kernel=cfg.kernel,
                bandwidth_scale=cfg.bandwidth_scale,
                max_words=cfg.cka_max_words,
                subsample_seed=cfg.seed,
            )
            content[m] = {
                "value": cc.value,
                "n_layers_used": cc.n_layers_used,
                "n_layers_excluded": cc.n_layers_excluded,
            }
    else:
        warn_list.append("contextual content needs both 'full' and 1-token tensors; section omitted")

    content_correlations = {}
    if content and perf:
        known = [m for m in selected if m in perf]
        if len(known) >= 3:
            content_v = [content[m]["value"] for m in known]
            content_correlations["content_vs_performance"] = _corr_block(
                stats.spearman([perf[m].llm_performance for m in known], content_v)
            )
            if all((m, FULL) in enc_cache for m in known):
                peak_v = []
                for m in known:
                    peaks = encoding.peak_stats(enc_cache[(m, FULL)])
                    peak_v.append(float(np.mean(peaks.peak_score[peaks.valid])))
                content_correlations["content_vs_peak_score"] = _corr_block(
                    stats.spearman(peak_v, content_v)
                )

    # per-electrode context effect and regional contrasts
    effects_block = {}
    if FULL in usable_windows and 1 in usable_windows:
        full_encs = {m: enc_cache[(m, FULL)] for m in selected}
        one_encs = {m: enc_cache[(m, 1)] for m in selected}
        effect = encoding.context_effect(full_encs, one_encs)
        electrode_ids = full_encs[selected[0]].electrode_ids
        write_csv(
            ["electrode_id", "region", "dist_pmhg_mm", "context_effect"],
            [
                [e, region_by_id[e], dist_by_id[e], effect[i]]
                for i, e in enumerate(electrode_ids)
            ],
            out / "effects.csv",
        )
        by_region = {}
        for region in REGION_ORDER:
            vals = np.array(
                [effect[i] for i, e in enumerate(electrode_ids) if region_by_id[e] == region]
            )
            vals = vals[np.isfinite(vals)]
            if vals.size:
                by_region[region] = {
                    "mean": float(vals.mean()),
                    "sem": float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else None,
                    "n": int(vals.size),
                    "_values": vals,
                }
        pairwise = {}
        names = [r for r in REGION_ORDER if r in by_region]
        for i, ra in enumerate(names):
            for rb in names[i + 1 :]:
                va, vb = by_region[ra]["_values"], by_region[rb]["_values"]
                if va.size >= 2 and vb.size >= 2:
                    w, p = stats.wilcoxon_ranksum(va, vb)
                    pairwise[f"{ra}__vs__{rb}"] = {"statistic": w, "p": p, "stars": significance_stars(p)}
        effects_block = {
            "by_region": {r: {k: v for k, v in b.items() if not k.startswith("_")} for r, b in by_region.items()},
            "pairwise_tests": pairwise,
            "effects_csv": "effects.csv",
        }

    inputs = [cfg.responses, cfg.electrodes]
    inputs += [tensors[(m, w)] for w in usable_windows for m in selected]
    if perf is not None:
        inputs.append(cfg.benchmarks)
    summary = {
        "stage": "context",
        "windows": [window_tag(w) for w in usable_windows],
        "per_window": per_window,
        "contextual_content": content,
        "content_correlations": content_correlations,
        "context_effect": effects_block,
        "warnings": warn_list,
        "provenance": provenance(cfg, inputs),
    }
    write_json(summary, out / "summary.json")
    return summary


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(
    out_dir,
    seed: int = 0,
    n_models: int = 4,
    n_layers: int = 32,
    n_words: int = 2000,
    n_dims: int = 128,
    n_electrodes: int = 200,
    noise_sigma: float = 0.0,
    context_windows: list | None = None,
    raw_electrodes: int = 16,
    raw_responsive: int = 10,
) -> dict:
    """Write a complete synthetic world plus a ready-to-run config.yaml."""
    out = Path(out_dir)
    (out / "tensors").mkdir(parents=True, exist_ok=True)
    (out / "raw").mkdir(parents=True, exist_ok=True)
    windows = context_windows if context_windows is not None else [1, 10, FULL]
    if FULL not in windows:
        windows = list(windows) + [FULL]

    spec = synth.PlantSpec(
        n_layers=n_layers,
        n_words=n_words,
        n_dims=n_dims,
        n_electrodes=n_electrodes,
        noise_sigma=noise_sigma,
        seed=seed,
    )
    teacher = synth.generate_teacher(spec)
    ctx = synth.generate_context_signal(spec)
    responses, metas = synth.generate_brain(spec, teacher, context_signal=ctx)
    write_responses(responses, out / "responses.nmt1")
    write_electrodes(metas, out / "electrodes.csv")

    models = synth.default_pseudo_models(n_models)
    for mi, pm in enumerate(models):
        for window in windows:
            tensor = synth.generate_pseudo_model(
                spec, teacher, pm, mi, context_window=window, context_signal=ctx
            )
            write_tensor(tensor, out / "tensors" / f"{pm.model_id}__ctx{window_tag(window)}.nmt1")
    write_benchmarks(
        [
            BenchmarkScores(
                model_id=pm.model_id,
                reading_comprehension=pm.quality,
                commonsense_reasoning=pm.quality,
            )
            for pm in models
        ],
        out / "benchmarks.csv",
    )

    raw_spec = synth.RawWorldSpec(
        n_electrodes=raw_electrodes, n_responsive=raw_responsive, seed=seed
    )
    traces, words, raw_metas = synth.generate_raw_world(raw_spec)
    for trace in traces:
        write_tensor(
            EmbeddingTensor(
                model_id=trace.electrode_id,
                context_window=FULL,
                data=trace.samples[np.newaxis, :, np.newaxis],
                word_ids=np.arange(trace.samples.size),
            ),
            out / "raw" / f"{trace.electrode_id}.nmt1",
        )
    signal.write_word_timings(words, out / "word_timings.csv")
    write_electrodes(raw_metas, out / "raw_electrodes.csv")

    cfg = PipelineConfig(
        tensors_dir=str(out / "tensors"),
        responses=str(out / "responses.nmt1"),
        electrodes=str(out / "electrodes.csv"),
        benchmarks=str(out / "benchmarks.csv"),
        raw_dir=str(out / "raw"),
        raw_electrodes=str(out / "raw_electrodes.csv"),
        word_timings=str(out / "word_timings.csv"),
        output_dir=str(out / "out"),
        seed=seed,
        pca_k=min(500, n_dims),
        context_windows=windows,
        cka_max_words=min(1000, n_words),
        raw_fs_hz=raw_spec.fs_hz,
    )
    dump_config(cfg, out / "config.yaml")

    plant = {
        "seed": seed,
        "layer_assignment": {str(k): v for k, v in spec.layer_assignment.items()},
        "noise_sigma": noise_sigma,
        "n_layers": n_layers,
        "n_words": n_words,
        "n_dims": n_dims,
        "n_electrodes": n_electrodes,
        "context_windows": [window_tag(w) for w in windows],
        "models": [
            {
                "model_id": pm.model_id,
                "quality": pm.quality,
                "layer_delay": pm.layer_delay,
                "noise_scale": pm.noise_scale,
                "context_gain": pm.context_gain,
            }
            for pm in models
        ],
        "raw": {"n_electrodes": raw_electrodes, "n_responsive": raw_responsive},
    }
    write_json(plant, out / "plant.json")
    return plant


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(cfg: PipelineConfig) -> dict:
    stages = {}
    for stage in ("preprocess", "encode", "hierarchy", "cka", "context"):
        path = Path(cfg.output_dir) / stage / "summary.json"
        if path.exists():
            with open(path, "r", encoding="utf-8") as f:
                stages[stage] = json.load(f)
    if not stages:
        raise ConfigError(f"no stage summaries under {cfg.output_dir}; run a command first")
    report = {
        "stages": sorted(stages),
        "summaries": stages,
        "config": _sanitize(cfg.as_dict()),
    }
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    write_json(report, Path(cfg.output_dir) / "report.json")
    return report
