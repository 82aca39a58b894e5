"""On-disk data model: NMT1 tensor files, response matrices, and metadata tables.

The NMT1 format is a single-line JSON header followed by a raw little-endian
float32 payload in (layer, word, dim) row-major order. Everything the pipeline
reads or writes goes through this module so the byte layout is defined in
exactly one place.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

# Sentinel for "unrestricted context"; serialized as the string "full".
FULL = "full"

MAGIC = "NMT1"
DTYPE = "f32le"

REGIONS = ("HG", "STG", "IFG", "SUBCENTRAL", "OTHER")


class FormatError(ValueError):
    """Malformed NMT1 file or table."""


def _check_context_window(value) -> int | str:
    if value == FULL:
        return FULL
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool) and value >= 1:
        return int(value)
    raise ValueError(f"context_window must be a positive integer or {FULL!r}, got {value!r}")


def _check_word_ids(word_ids: np.ndarray, n_words: int) -> np.ndarray:
    ids = np.asarray(word_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.shape[0] != n_words:
        raise ValueError(f"word_ids must have length {n_words}, got shape {ids.shape}")
    if n_words > 1 and not np.all(np.diff(ids) > 0):
        raise ValueError("word_ids must be strictly increasing with no duplicates")
    return ids


@dataclass
class EmbeddingTensor:
    """Per-model stack of word embeddings, shape (n_layers, n_words, n_dims)."""

    model_id: str
    context_window: int | str
    data: np.ndarray
    word_ids: np.ndarray

    def __post_init__(self):
        self.context_window = _check_context_window(self.context_window)
        # float32 arrives from disk and is kept; anything else is held at
        # float64 so in-memory math is not quantized before serialization
        self.data = np.asarray(self.data)
        if self.data.dtype != np.float32:
            self.data = self.data.astype(np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"tensor data must be 3-D (layers, words, dims), got {self.data.ndim}-D")
        if min(self.data.shape) < 1:
            raise ValueError(f"tensor dimensions must be positive, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in tensor data")
        self.word_ids = _check_word_ids(self.word_ids, self.n_words)

    @property
    def n_layers(self) -> int:
        return self.data.shape[0]

    @property
    def n_words(self) -> int:
        return self.data.shape[1]

    @property
    def n_dims(self) -> int:
        return self.data.shape[2]

    def layer(self, index: int) -> np.ndarray:
        """Embeddings of one layer as (n_words, n_dims); layers are 0-indexed here."""
        return self.data[index]


@dataclass
class ResponseMatrix:
    """Averaged word responses, shape (n_electrodes, n_words)."""

    values: np.ndarray
    word_ids: np.ndarray
    electrode_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("response values must be 2-D (electrodes, words)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in response matrix")
        self.word_ids = _check_word_ids(self.word_ids, self.values.shape[1])
        self.electrode_ids = [str(e) for e in self.electrode_ids]
        if len(self.electrode_ids) != self.values.shape[0]:
            raise ValueError("electrode_ids length does not match row count")

    @property
    def n_electrodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_words(self) -> int:
        return self.values.shape[1]


@dataclass
class ElectrodeMeta:
    """Per-electrode metadata: anatomical position, latency, responsiveness."""

    electrode_id: str
    subject_id: str
    dist_pmhg_mm: float
    region: str = "OTHER"
    lag_ms: float | None = None
    responsive: bool = False
    t_value: float = 0.0

    def __post_init__(self):
        self.dist_pmhg_mm = float(self.dist_pmhg_mm)
        if not np.isfinite(self.dist_pmhg_mm) or self.dist_pmhg_mm < 0:
            raise ValueError(f"dist_pmhg_mm must be finite and non-negative, got {self.dist_pmhg_mm}")
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}, expected one of {REGIONS}")
        if self.lag_ms is not None:
            self.lag_ms = float(self.lag_ms)
            if not np.isfinite(self.lag_ms) or self.lag_ms < 0:
                raise ValueError(f"lag_ms must be finite and non-negative, got {self.lag_ms}")
        self.t_value = float(self.t_value)


@dataclass
class BenchmarkScores:
    """Benchmark category scores for one model; llm_performance is their mean."""

    model_id: str
    reading_comprehension: float
    commonsense_reasoning: float
    llm_performance: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for name in ("reading_comprehension", "commonsense_reasoning"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            setattr(self, name, v)
        mean = aggregate_benchmarks(self.reading_comprehension, self.commonsense_reasoning)
        if self.llm_performance is None:
            self.llm_performance = mean
        elif abs(float(self.llm_performance) - mean) > 1e-9:
            raise ValueError(
                f"llm_performance {self.llm_performance} is not the mean of the category scores ({mean})"
            )


def aggregate_benchmarks(reading_comprehension: float, commonsense_reasoning: float) -> float:
    """Overall performance: arithmetic mean of the two category scores."""
    for v in (reading_comprehension, commonsense_reasoning):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"benchmark scores must lie in [0, 1], got {v}")
    return (reading_comprehension + commonsense_reasoning) / 2.0


# ---------------------------------------------------------------------------
# NMT1 tensor files
# ---------------------------------------------------------------------------

def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via temp file + rename so readers never observe partial files."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


def write_tensor(t: EmbeddingTensor, path) -> None:
    header = {
        "magic": MAGIC,
        "dtype": DTYPE,
        "shape": [t.n_layers, t.n_words, t.n_dims],
        "model_id": t.model_id,
        "context_window": t.context_window,
        "word_ids": [int(w) for w in t.word_ids],
    }
    line = json.dumps(header, sort_keys=True) + "\n"
    payload = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
    atomic_write_bytes(path, line.encode("utf-8") + payload)


def read_tensor_header(path) -> dict:
    """Parse and validate just the JSON header line (no payload read)."""
    with open(path, "rb") as f:
        line = f.readline()
    if not line.startswith(b"{"):
        raise FormatError(f"{path}: not an NMT1 file (missing JSON header)")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed header: {exc}") from exc
    if header.get("magic") != MAGIC:
        raise FormatError(f"{path}: bad magic {header.get('magic')!r}")
    return header


def read_tensor(path) -> EmbeddingTensor:
    with open(path, "rb") as f:
        line = f.readline()
        if not line.startswith(b"{"):
            raise FormatError(f"{path}: not an NMT1 file (missing JSON header)")
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: malformed header: {exc}") from exc
        if header.get("magic") != MAGIC:
            raise FormatError(f"{path}: bad magic {header.get('magic')!r}")
        if header.get("dtype") != DTYPE:
            raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
        shape = header.get("shape")
        if not (isinstance(shape, list) and len(shape) == 3 and all(isinstance(s, int) and s > 0 for s in shape)):
            raise FormatError(f"{path}: bad shape {shape!r}")
        payload = f.read()
    expected = 4 * shape[0] * shape[1] * shape[2]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload length mismatch (expected {expected} bytes, got {len(payload)})")
    data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    try:
        return EmbeddingTensor(
            model_id=header["model_id"],
            context_window=header["context_window"],
            data=data,
            word_ids=np.asarray(header["word_ids"], dtype=np.int64),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing header field {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Response matrices: NMT1 payload of shape (1, n_words, n_electrodes) plus a
# JSON sidecar listing electrode ids in dim order.
# ---------------------------------------------------------------------------

def _responses_sidecar(path) -> str:
    return os.fspath(path) + ".electrodes.json"


def write_responses(r: ResponseMatrix, path) -> None:
    t = EmbeddingTensor(
        model_id="responses",
        context_window=FULL,
        data=r.values.T[np.newaxis, :, :],
        word_ids=r.word_ids,
    )
    write_tensor(t, path)
    atomic_write_bytes(
        _responses_sidecar(path),
        (json.dumps({"electrode_ids": r.electrode_ids}, sort_keys=True) + "\n").encode("utf-8"),
    )


def read_responses(path) -> ResponseMatrix:
    t = read_tensor(path)
    if t.n_layers != 1:
        raise FormatError(f"{path}: response file must have a single layer, got {t.n_layers}")
    with open(_responses_sidecar(path), "r", encoding="utf-8") as f:
        electrode_ids = json.load(f)["electrode_ids"]
    return ResponseMatrix(values=t.data[0].T, word_ids=t.word_ids, electrode_ids=electrode_ids)


# ---------------------------------------------------------------------------
# Word alignment
# ---------------------------------------------------------------------------

def align_words(t: EmbeddingTensor, r: ResponseMatrix) -> tuple[EmbeddingTensor, ResponseMatrix]:
    """Restrict both inputs to their common word_ids, in ascending order."""
    common = np.intersect1d(t.word_ids, r.word_ids)
    if common.size == 0:
        raise ValueError("no common word_ids between tensor and responses")
    if common.size == t.n_words == r.n_words:
        return t, r
    t_idx = np.searchsorted(t.word_ids, common)
    r_idx = np.searchsorted(r.word_ids, common)
    t2 = EmbeddingTensor(
        model_id=t.model_id,
        context_window=t.context_window,
        data=t.data[:, t_idx, :],
        word_ids=common,
    )
    r2 = ResponseMatrix(values=r.values[:, r_idx], word_ids=common, electrode_ids=r.electrode_ids)
    return t2, r2


def align_tensors(a: EmbeddingTensor, b: EmbeddingTensor) -> tuple[EmbeddingTensor, EmbeddingTensor]:
    """Restrict two tensors to their common word_ids, in ascending order."""
    common = np.intersect1d(a.word_ids, b.word_ids)
    if common.size == 0:
        raise ValueError("no common word_ids between tensors")
    if common.size == a.n_words == b.n_words:
        return a, b
    out = []
    for t in (a, b):
        idx = np.searchsorted(t.word_ids, common)
        out.append(
            EmbeddingTensor(
                model_id=t.model_id,
                context_window=t.context_window,
                data=t.data[:, idx, :],
                word_ids=common,
            )
        )
    return out[0], out[1]


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

ELECTRODE_COLUMNS = ["electrode_id", "subject_id", "dist_pmhg_mm", "region", "lag_ms", "responsive", "t_value"]


def read_electrodes(path) -> list[ElectrodeMeta]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ELECTRODE_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(ELECTRODE_COLUMNS)}, got {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                ElectrodeMeta(
                    electrode_id=row["electrode_id"],
                    subject_id=row["subject_id"],
                    dist_pmhg_mm=float(row["dist_pmhg_mm"]),
                    region=row["region"],
                    lag_ms=float(row["lag_ms"]) if row["lag_ms"] != "" else None,
                    responsive=row["responsive"].strip().lower() == "true",
                    t_value=float(row["t_value"]),
                )
            )
    return out


def write_electrodes(metas: list[ElectrodeMeta], path) -> None:
    lines = [",".join(ELECTRODE_COLUMNS)]
    for m in metas:
        lines.append(
            ",".join(
                [
                    m.electrode_id,
                    m.subject_id,
                    repr(m.dist_pmhg_mm),
                    m.region,
                    "" if m.lag_ms is None else repr(m.lag_ms),
                    "true" if m.responsive else "false",
                    repr(m.t_value),
                ]
            )
        )
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


BENCHMARK_COLUMNS = ["model_id", "reading_comprehension", "commonsense_reasoning"]


def read_benchmarks(path) -> dict[str, BenchmarkScores]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != BENCHMARK_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(BENCHMARK_COLUMNS)}, got {reader.fieldnames}")
        out = {}
        for row in reader:
            s = BenchmarkScores(
                model_id=row["model_id"],
                reading_comprehension=float(row["reading_comprehension"]),
                commonsense_reasoning=float(row["commonsense_reasoning"]),
            )
            out[s.model_id] = s
    return out


def write_benchmarks(scores: list[BenchmarkScores], path) -> None:
    lines = [",".join(BENCHMARK_COLUMNS)]
    for s in scores:
        lines.append(",".join([s.model_id, repr(s.reading_comprehension), repr(s.commonsense_reasoning)]))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
