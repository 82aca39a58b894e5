"""Centered kernel alignment between embedding sets.

CKA uses the biased (plug-in) HSIC estimator on double-centered Gram matrices.
The RBF bandwidth follows the median heuristic (sigma = bandwidth_scale times
the median nonzero pairwise distance), and layer-pair matrices subsample long
stimuli to bound the n x n Gram cost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .iodata import EmbeddingTensor

LINEAR = "linear"
RBF = "rbf"

DEFAULT_MAX_WORDS = 2000
DEFAULT_SUBSAMPLE_SEED = 0


class DegenerateKernelError(ValueError):
    """Kernel or HSIC degenerate (identical rows or constant features)."""


def gram(X: np.ndarray, kernel: str = RBF, bandwidth_scale: float = 1.0) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in kernel input")
    if kernel == LINEAR:
        return X @ X.T
    if kernel != RBF:
        raise ValueError(f"unknown kernel {kernel!r}")
    sq = np.sum(X**2, axis=1)
    d2 = np.maximum(sq[:, np.newaxis] + sq[np.newaxis, :] - 2.0 * (X @ X.T), 0.0)
    off = d2[np.triu_indices_from(d2, k=1)]
    nonzero = off[off > 0]
    if nonzero.size == 0:
        raise DegenerateKernelError("degenerate bandwidth: all pairwise distances are zero")
    sigma = bandwidth_scale * np.sqrt(np.median(nonzero))
    return np.exp(-d2 / (2.0 * sigma**2))


def center_gram(K: np.ndarray) -> np.ndarray:
    """Double centering: H K H with H = I - 11^T/n."""
    row = K.mean(axis=0)
    return K - row[np.newaxis, :] - row[:, np.newaxis] + row.mean()


def _cka_from_centered(kc: np.ndarray, lc: np.ndarray) -> float:
    hsic_xy = float(np.tensordot(kc, lc))
    hsic_xx = float(np.tensordot(kc, kc))
    hsic_yy = float(np.tensordot(lc, lc))
    if hsic_xx <= 0.0 or hsic_yy <= 0.0:
        raise DegenerateKernelError("zero self-HSIC (constant features)")
    if hsic_xy == hsic_xx == hsic_yy:
        return 1.0  # bit-identical inputs: avoid sqrt rounding off exact unity
    return hsic_xy / np.sqrt(hsic_xx * hsic_yy)


def cka(X: np.ndarray, Y: np.ndarray, kernel: str = RBF, bandwidth_scale: float = 1.0) -> float:
    """Similarity in [0, 1] between two row-aligned representations."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"row count mismatch: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[0] < 4:
        raise ValueError(f"need at least 4 rows, got {X.shape[0]}")
    kc = center_gram(gram(X, kernel, bandwidth_scale))
    lc = center_gram(gram(Y, kernel, bandwidth_scale))
    return _cka_from_centered(kc, lc)


@dataclass
class SimilarityMatrix:
    """Layer-by-layer CKA between two models, shape (n_layers_a, n_layers_b)."""

    model_a: str
    model_b: str
    values: np.ndarray
    kernel: str
    rbf_bandwidth_rule: str = "median*1.0"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("similarity values must be 2-D")
        finite = self.values[np.isfinite(self.values)]
        if finite.size and (finite.min() < -1e-9 or finite.max() > 1.0 + 1e-9):
            raise ValueError("CKA values outside [0, 1]")


def subsample_indices(n: int, max_words: int, seed: int) -> np.ndarray:
    """Uniform without-replacement subsample, returned in stimulus order."""
    if n <= max_words:
        return np.arange(n)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x5B5,)))
    return np.sort(rng.choice(n, size=max_words, replace=False))


def gram_stack(
    t: EmbeddingTensor,
    idx: np.ndarray,
    kernel: str = RBF,
    bandwidth_scale: float = 1.0,
) -> np.ndarray:
    """Centered Gram of every layer, flattened to rows of an (n_layers, n*n) stack.

    HSIC values between two stacks then come from a single matrix product,
    which is what makes whole model-pair matrices affordable.
    """
    rows = []
    for i in range(t.n_layers):
        kc = center_gram(gram(t.layer(i)[idx], kernel, bandwidth_scale))
        if float(np.tensordot(kc, kc)) <= 0:
            raise DegenerateKernelError(f"{t.model_id}: zero self-HSIC at layer {i + 1}")
        rows.append(kc.ravel())
    return np.vstack(rows)


def similarity_from_stacks(
    a_stack: np.ndarray, b_stack: np.ndarray
) -> np.ndarray:
    self_a = np.einsum("ij,ij->i", a_stack, a_stack)
    self_b = np.einsum("ij,ij->i", b_stack, b_stack)
    return (a_stack @ b_stack.T) / np.sqrt(np.outer(self_a, self_b))


def layer_similarity_matrix(
    a: EmbeddingTensor,
    b: EmbeddingTensor,
    kernel: str = RBF,
    bandwidth_scale: float = 1.0,
    max_words: int = DEFAULT_MAX_WORDS,
    subsample_seed: int = DEFAULT_SUBSAMPLE_SEED,
) -> SimilarityMatrix:
    """CKA between every layer pair; entry (i, j) is cka(a layer i, b layer j)."""
    if not np.array_equal(a.word_ids, b.word_ids):
        raise ValueError("word misalignment: tensors have different word_ids")
    idx = subsample_indices(a.n_words, max_words, subsample_seed)
    b_stack = gram_stack(b, idx, kernel, bandwidth_scale)
    a_stack = b_stack if a is b else gram_stack(a, idx, kernel, bandwidth_scale)
    values = similarity_from_stacks(a_stack, b_stack)
    rule = f"{kernel};median*{bandwidth_scale};max_words={max_words};seed={subsample_seed}"
    return SimilarityMatrix(
        model_a=a.model_id, model_b=b.model_id, values=values, kernel=kernel, rbf_bandwidth_rule=rule
    )


TOP5 = "TOP5"
BOTTOM5 = "BOTTOM5"
EXCLUDED = "EXCLUDED"

TOP_TOP = "TOP_TOP"
TOP_BOTTOM = "TOP_BOTTOM"
BOTTOM_BOTTOM = "BOTTOM_BOTTOM"


def label_groups(performance: dict[str, float], group_size: int = 5) -> dict[str, str]:
    """Label models TOP5/BOTTOM5/EXCLUDED by sorted benchmark performance."""
    if group_size < 1:
        raise ValueError("group_size must be positive")
    if len(performance) < 2 * group_size:
        raise ValueError(
            f"need at least {2 * group_size} models for group size {group_size}, got {len(performance)}"
        )
    ranked = sorted(performance, key=lambda m: (-performance[m], m))
    labels = {m: EXCLUDED for m in ranked}
    for m in ranked[:group_size]:
        labels[m] = TOP5
    for m in ranked[-group_size:]:
        labels[m] = BOTTOM5
    return labels


def group_average(
    matrices: list[SimilarityMatrix], labeling: dict[str, str], pair_class: str
) -> SimilarityMatrix:
    """Elementwise mean over cross-model matrices in one label class.

    TOP_BOTTOM output is oriented with the TOP5 model on rows, so an offset
    above the diagonal reads as a feature-extraction delay in the bottom model.
    """
    if pair_class not in (TOP_TOP, TOP_BOTTOM, BOTTOM_BOTTOM):
        raise ValueError(f"unknown pair class {pair_class!r}")
    want = {
        TOP_TOP: (TOP5, TOP5),
        TOP_BOTTOM: (TOP5, BOTTOM5),
        BOTTOM_BOTTOM: (BOTTOM5, BOTTOM5),
    }[pair_class]
    picked = []
    shape = None
    for m in matrices:
        if m.model_a == m.model_b:
            continue
        la, lb = labeling.get(m.model_a, EXCLUDED), labeling.get(m.model_b, EXCLUDED)
        if (la, lb) == want:
            values = m.values
        elif (lb, la) == want:
            values = m.values.T
        else:
            continue
        if shape is None:
            shape = values.shape
        elif values.shape != shape:
            raise ValueError(f"matrix shape mismatch in group average: {values.shape} vs {shape}")
        picked.append(values)
    if not picked:
        raise ValueError(f"no model pairs in class {pair_class}")
    mean = np.mean(picked, axis=0)
    return SimilarityMatrix(
        model_a=pair_class, model_b=f"n={len(picked)}", values=mean, kernel=matrices[0].kernel,
        rbf_bandwidth_rule=matrices[0].rbf_bandwidth_rule,
    )


def diagonal_similarity(m: SimilarityMatrix) -> float:
    """Mean CKA along matched layer indices; requires a square matrix."""
    if m.values.shape[0] != m.values.shape[1]:
        raise ValueError(f"diagonal similarity needs a square matrix, got {m.values.shape}")
    return float(np.mean(np.diag(m.values)))


@dataclass(frozen=True)
class ContextualContent:
    """Mean over layers of 1 - cka(full layer, 1-token layer 1)."""

    value: float
    n_layers_used: int
    n_layers_excluded: int


def contextual_content(
    full: EmbeddingTensor,
    one_token: EmbeddingTensor,
    kernel: str = RBF,
    bandwidth_scale: float = 1.0,
    max_words: int = DEFAULT_MAX_WORDS,
    subsample_seed: int = DEFAULT_SUBSAMPLE_SEED,
) -> ContextualContent:
    if one_token.context_window != 1:
        raise ValueError(f"reference tensor has context_window {one_token.context_window}, expected 1")
    if not np.array_equal(full.word_ids, one_token.word_ids):
        raise ValueError("word misalignment: tensors have different word_ids")
    idx = subsample_indices(full.n_words, max_words, subsample_seed)
    ref = center_gram(gram(one_token.layer(0)[idx], kernel, bandwidth_scale))
    diffs = []
    excluded = 0
    for layer in range(full.n_layers):
        try:
            kc = center_gram(gram(full.layer(layer)[idx], kernel, bandwidth_scale))
            diffs.append(1.0 - _cka_from_centered(kc, ref))
        except DegenerateKernelError:
            excluded += 1
    if not diffs:
        raise DegenerateKernelError("every layer degenerate in contextual content")
    if excluded:
        warnings.warn(f"{full.model_id}: {excluded} layers excluded from contextual content")
    return ContextualContent(value=float(np.mean(diffs)), n_layers_used=len(diffs), n_layers_excluded=excluded)
