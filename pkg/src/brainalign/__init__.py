"""Alignment analysis between language-model embeddings and neural responses."""

from .iodata import (
    FULL,
    BenchmarkScores,
    ElectrodeMeta,
    EmbeddingTensor,
    FormatError,
    ResponseMatrix,
    aggregate_benchmarks,
    align_tensors,
    align_words,
    read_responses,
    read_tensor,
    write_responses,
    write_tensor,
)
from .stats import ZeroVarianceError

__version__ = "0.1.0"

__all__ = [
    "FULL",
    "BenchmarkScores",
    "ElectrodeMeta",
    "EmbeddingTensor",
    "FormatError",
    "ResponseMatrix",
    "ZeroVarianceError",
    "aggregate_benchmarks",
    "align_tensors",
    "align_words",
    "read_responses",
    "read_tensor",
    "write_responses",
    "write_tensor",
    "__version__",
]
