"""Statistical primitives shared by the analysis stages.

Correlations report two-sided p-values from the t-distribution on n-2 degrees
of freedom; the rank-sum test uses the normal approximation with tie-corrected
variance and a continuity correction; multiple comparisons are controlled with
Holm's step-down procedure (family-wise error rate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class ZeroVarianceError(ValueError):
    """An input with zero variance makes the statistic undefined."""


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p: float
    n: int
    method: str  # "pearson" | "spearman"


@dataclass(frozen=True)
class BootstrapCI:
    point: float
    lo: float
    hi: float
    n_resamples: int
    level: float


def _as_1d(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected 1-D input, got shape {arr.shape}")
    return arr


def _corr_pvalue(r: float, n: int) -> float:
    # Two-sided p from t = r * sqrt((n-2) / (1-r^2)), df = n-2.
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def pearson(x, y) -> CorrelationResult:
    x, y = _as_1d(x), _as_1d(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError("zero variance input to correlation")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    r = float(np.clip(r, -1.0, 1.0))
    return CorrelationResult(r=r, p=_corr_pvalue(r, n), n=n, method="pearson")


def spearman(x, y) -> CorrelationResult:
    x, y = _as_1d(x), _as_1d(y)
    rx = sps.rankdata(x, method="average")
    ry = sps.rankdata(y, method="average")
    res = pearson(rx, ry)
    return CorrelationResult(r=res.r, p=res.p, n=res.n, method="spearman")


def wilcoxon_ranksum(a, b) -> tuple[float, float]:
    """Two-sided rank-sum test; returns (rank sum of `a`, p-value)."""
    a, b = _as_1d(a), _as_1d(b)
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ValueError(f"need at least 2 samples per group, got {na} and {nb}")
    n = na + nb
    pooled = np.concatenate([a, b])
    ranks = sps.rankdata(pooled, method="average")
    w = float(ranks[:na].sum())
    mu = na * (n + 1) / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return w, 1.0
    diff = w - mu
    z = (diff - 0.5 * np.sign(diff)) / np.sqrt(var)
    p = float(min(1.0, 2.0 * sps.norm.sf(abs(z))))
    return w, p


def holm_correct(p, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Holm step-down adjustment; returns (adjusted p, reject flags) in input order."""
    p = _as_1d(p)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m, dtype=np.float64)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, min(1.0, (m - i) * p[idx]))
        adjusted[idx] = running
    reject = adjusted < alpha
    return adjusted, reject


def bootstrap_ci(
    data,
    statistic,
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapCI:
    """Percentile bootstrap CI; resamples rows, deterministic given seed.

    Each resample uses its own generator derived from (seed, index), so the
    interval does not depend on evaluation order.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 data points, got {n}")
    if n_resamples < 100:
        raise ValueError(f"need at least 100 resamples, got {n_resamples}")
    point = float(statistic(data))
    values = np.full(n_resamples, np.nan)
    for i in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        idx = rng.integers(0, n, size=n)
        try:
            values[i] = float(statistic(data[idx]))
        except (ValueError, ZeroDivisionError, FloatingPointError):
            pass
    good = values[np.isfinite(values)]
    if good.size < 0.9 * n_resamples:
        raise ValueError(
            f"statistic undefined on {n_resamples - good.size}/{n_resamples} resamples"
        )
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    lo, hi = np.quantile(good, [lo_q, hi_q])
    return BootstrapCI(point=point, lo=float(lo), hi=float(hi), n_resamples=n_resamples, level=level)


def significance_stars(p: float) -> str:
    """Thresholds 0.05 / 0.01 / 0.001 mapped to * / ** / ***."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""
