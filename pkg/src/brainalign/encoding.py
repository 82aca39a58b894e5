"""Embedding-to-brain mapping: PCA reduction and cross-validated ridge scoring.

Words are split into contiguous folds in stimulus order. Within each training
split the ridge penalty is chosen from a grid by closed-form leave-one-out
generalized cross-validation (GCV), the model is fit with an intercept, and the
held-out fold is scored by Pearson correlation; the reported score is the mean
over folds. One SVD per (layer, fold) is shared across all electrodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .iodata import EmbeddingTensor, ResponseMatrix
from .stats import ZeroVarianceError

DEFAULT_LAMBDAS = np.logspace(-2, 4, 13)


@dataclass
class PcaModel:
    """Top-k principal axes of a (words x dims) matrix."""

    mean: np.ndarray
    components: np.ndarray  # (k, n_dims), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return Z @ self.components + self.mean


def fit_pca(X: np.ndarray, k: int = 500) -> PcaModel:
    """PCA via SVD of the centered matrix; k is clamped to min(n-1, d)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {X.shape}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    n, d = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    if not np.any(Xc):
        raise ZeroVarianceError("zero variance: all rows identical")
    k_eff = min(k, n - 1, d)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    components = vt[:k_eff].copy()
    # deterministic sign: largest-magnitude loading of each axis is positive
    flip = np.sign(components[np.arange(k_eff), np.argmax(np.abs(components), axis=1)])
    components *= flip[:, np.newaxis]
    explained = s[:k_eff] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def make_folds(n: int, n_folds: int) -> list[np.ndarray]:
    """Contiguous near-equal folds in stimulus order."""
    if n_folds < 2:
        raise ValueError(f"need at least 2 folds, got {n_folds}")
    if n < 2 * n_folds:
        raise ValueError(f"need at least {2 * n_folds} words for {n_folds} folds, got {n}")
    return [idx for idx in np.array_split(np.arange(n), n_folds)]


def _check_lambdas(lambdas) -> np.ndarray:
    grid = np.sort(np.asarray(lambdas, dtype=np.float64))
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid must be positive and finite")
    return grid


def _gcv_ridge_predict(
    X_train: np.ndarray, Y_train: np.ndarray, X_test: np.ndarray, lambdas: np.ndarray
) -> np.ndarray:
    """Held-out predictions with a per-target GCV-selected penalty.

    Ties in the GCV score resolve to the smallest lambda, so the result is
    independent of the grid's original ordering.
    """
    n = X_train.shape[0]
    x_mean = X_train.mean(axis=0)
    y_mean = Y_train.mean(axis=0)
    Xc = X_train - x_mean
    Yc = Y_train - y_mean
    u, s, vt = np.linalg.svd(Xc, full_matrices=False)
    uty = u.T @ Yc  # (r, n_targets)
    s2 = s**2
    y_norm2 = np.sum(Yc**2, axis=0)
    gcv = np.empty((lambdas.size, Y_train.shape[1]))
    for i, lam in enumerate(lambdas):
        d = s2 / (s2 + lam)
        rss = y_norm2 - (2.0 * d - d**2) @ uty**2
        denom = 1.0 - d.sum() / n
        gcv[i] = np.inf if denom < 1e-12 else (rss / n) / denom**2
    pick = np.argmin(gcv, axis=0)
    preds = np.empty((X_test.shape[0], Y_train.shape[1]))
    Xtc = X_test - x_mean
    for i in np.unique(pick):
        cols = pick == i
        shrink = s / (s2 + lambdas[i])
        beta = vt.T @ (shrink[:, np.newaxis] * uty[:, cols])
        preds[:, cols] = Xtc @ beta + y_mean[cols]
    return preds


def gcv_ridge_fit(X, y, lambdas=DEFAULT_LAMBDAS) -> tuple[np.ndarray, float, float]:
    """Ridge fit with intercept on all rows, penalty chosen by GCV.

    Returns (coefficients, intercept, selected lambda).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, k) and y (n,) with matching n")
    lambdas = _check_lambdas(lambdas)
    n = X.shape[0]
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    u, s, vt = np.linalg.svd(X - x_mean, full_matrices=False)
    uty = u.T @ (y - y_mean)
    s2 = s**2
    y_norm2 = float(np.sum((y - y_mean) ** 2))
    best = (np.inf, lambdas[0])
    for lam in lambdas:
        d = s2 / (s2 + lam)
        rss = y_norm2 - (2.0 * d - d**2) @ uty**2
        denom = 1.0 - d.sum() / n
        score = np.inf if denom < 1e-12 else (rss / n) / denom**2
        if score < best[0]:
            best = (score, lam)
    lam = best[1]
    coef = vt.T @ ((s / (s2 + lam)) * uty)
    return coef, float(y_mean - x_mean @ coef), float(lam)


def _fold_correlations(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Columnwise Pearson correlation; NaN where either side is constant."""
    pc = pred - pred.mean(axis=0)
    tc = truth - truth.mean(axis=0)
    denom = np.sqrt(np.sum(pc**2, axis=0) * np.sum(tc**2, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.sum(pc * tc, axis=0) / denom
    r[denom == 0] = np.nan
    return r


def ridge_cv_scores(
    X: np.ndarray,
    Y: np.ndarray,
    n_folds: int = 10,
    lambdas=DEFAULT_LAMBDAS,
) -> tuple[np.ndarray, np.ndarray]:
    """Cross-validated prediction correlation for each column of Y.

    Returns (scores, n_valid_folds); a score is NaN when every fold was
    degenerate (constant truth or constant prediction on the held-out split).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[0] == 1 and X.shape[0] != 1:
        Y = Y.T
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
        raise ValueError("non-finite values in regression inputs")
    lambdas = _check_lambdas(lambdas)
    folds = make_folds(X.shape[0], n_folds)
    n_targets = Y.shape[1]
    corr_sum = np.zeros(n_targets)
    n_valid = np.zeros(n_targets, dtype=np.int64)
    for test_idx in folds:
        train_mask = np.ones(X.shape[0], dtype=bool)
        train_mask[test_idx] = False
        pred = _gcv_ridge_predict(X[train_mask], Y[train_mask], X[test_idx], lambdas)
        r = _fold_correlations(pred, Y[test_idx])
        ok = np.isfinite(r)
        corr_sum[ok] += r[ok]
        n_valid += ok
    with np.errstate(invalid="ignore"):
        scores = np.where(n_valid > 0, corr_sum / np.maximum(n_valid, 1), np.nan)
    return scores, n_valid


def ridge_cv_score(X, y, n_folds: int = 10, lambdas=DEFAULT_LAMBDAS) -> float:
    """Single-target convenience wrapper around ridge_cv_scores."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("y must be 1-D")
    scores, _ = ridge_cv_scores(X, y[:, np.newaxis], n_folds=n_folds, lambdas=lambdas)
    return float(scores[0])


@dataclass
class EncodingResult:
    """Cross-validated prediction correlations, shape (n_electrodes, n_layers)."""

    model_id: str
    scores: np.ndarray
    context_window: int | str
    electrode_ids: list[str]

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ValueError("scores must be 2-D (electrodes, layers)")
        finite = self.scores[np.isfinite(self.scores)]
        if finite.size and (finite.min() < -1.0 - 1e-9 or finite.max() > 1.0 + 1e-9):
            raise ValueError("correlation scores outside [-1, 1]")
        if len(self.electrode_ids) != self.scores.shape[0]:
            raise ValueError("electrode_ids length does not match score rows")

    @property
    def n_layers(self) -> int:
        return self.scores.shape[1]


def encode_model(
    t: EmbeddingTensor,
    r: ResponseMatrix,
    k: int = 500,
    n_folds: int = 10,
    lambdas=DEFAULT_LAMBDAS,
) -> EncodingResult:
    """Score every (electrode, layer) pair: per-layer PCA then ridge CV."""
    if t.n_words != r.n_words or not np.array_equal(t.word_ids, r.word_ids):
        raise ValueError("tensor and responses are not word-aligned; call align_words first")
    scores = np.full((r.n_electrodes, t.n_layers), np.nan)
    Y = r.values.T  # (n_words, n_electrodes)
    for layer in range(t.n_layers):
        try:
            pca = fit_pca(t.layer(layer), k=k)
        except ZeroVarianceError:
            warnings.warn(f"{t.model_id}: layer {layer + 1} has zero variance; scores left NaN")
            continue
        Z = pca.transform(t.layer(layer))
        layer_scores, _ = ridge_cv_scores(Z, Y, n_folds=n_folds, lambdas=lambdas)
        scores[:, layer] = layer_scores
    return EncodingResult(
        model_id=t.model_id,
        scores=scores,
        context_window=t.context_window,
        electrode_ids=list(r.electrode_ids),
    )


@dataclass
class PeakStats:
    """Per-electrode peak score and 1-based peak layer (smallest on ties)."""

    peak_score: np.ndarray
    peak_layer: np.ndarray  # int, 1-based
    valid: np.ndarray  # False where every layer was NaN


def peak_stats(e: EncodingResult) -> PeakStats:
    n_el = e.scores.shape[0]
    peak_score = np.full(n_el, np.nan)
    peak_layer = np.zeros(n_el, dtype=np.int64)
    valid = np.zeros(n_el, dtype=bool)
    for i in range(n_el):
        row = e.scores[i]
        finite = np.flatnonzero(np.isfinite(row))
        if finite.size == 0:
            warnings.warn(f"electrode {e.electrode_ids[i]}: all layers NaN, excluded from peaks")
            continue
        best = finite[np.argmax(row[finite])]
        peak_score[i] = row[best]
        peak_layer[i] = best + 1
        valid[i] = True
    return PeakStats(peak_score=peak_score, peak_layer=peak_layer, valid=valid)


def sliding_peak_layer(
    peak_layers: np.ndarray, dist: np.ndarray, window_n: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Centered moving average of peak layer over electrodes sorted by distance.

    At the edges both half-windows shrink by the same amount so the window
    stays centered. Returns (sorted distance, smoothed layer).
    """
    peak_layers = np.asarray(peak_layers, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    n = peak_layers.size
    if n != dist.size:
        raise ValueError("peak_layers and dist length mismatch")
    if n < 2:
        raise ValueError(f"need at least 2 electrodes, got {n}")
    if window_n < 1 or window_n > n:
        raise ValueError(f"window_n must lie in [1, {n}], got {window_n}")
    order = np.argsort(dist, kind="stable")
    d = dist[order]
    pl = peak_layers[order]
    left, right = (window_n - 1) // 2, window_n // 2
    smoothed = np.empty(n)
    for i in range(n):
        trim = max(0, left - i, i + right - (n - 1))
        lo = max(0, i - max(0, left - trim))
        hi = min(n - 1, i + max(0, right - trim))
        smoothed[i] = pl[lo : hi + 1].mean()
    return d, smoothed


def context_effect(
    full: dict[str, EncodingResult], limited: dict[str, EncodingResult]
) -> np.ndarray:
    """Per-electrode mean over models of (full-context peak - 1-token peak)."""
    if set(full) != set(limited):
        raise ValueError(f"model sets differ: {sorted(full)} vs {sorted(limited)}")
    if not full:
        raise ValueError("no models given")
    deltas = []
    for model_id in sorted(full):
        f, l = full[model_id], limited[model_id]
        if l.context_window != 1:
            raise ValueError(f"{model_id}: limited result has context_window {l.context_window}, expected 1")
        if f.electrode_ids != l.electrode_ids:
            raise ValueError(f"{model_id}: electrode sets differ between full and limited results")
        deltas.append(peak_stats(f).peak_score - peak_stats(l).peak_score)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return np.nanmean(np.vstack(deltas), axis=0)
