"""Brain-hierarchy alignment: electrode binning, layer profiles, center of mass.

Electrodes are grouped into half-open bins [k*w, (k+1)*w) along either the
distance-from-pmHG axis or the response-lag axis. Per-electrode layer scores
are min-max normalized, averaged within each bin, and summarized by their
center of mass over layers; the alignment score is the Pearson correlation
between bin center of mass and bin position.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .encoding import DEFAULT_LAMBDAS, EncodingResult, gcv_ridge_fit
from .iodata import ElectrodeMeta
from .signal import RecordingTrace
from .stats import CorrelationResult, ZeroVarianceError, pearson

DIST_PMHG = "DIST_PMHG"
LAG = "LAG"

DEFAULT_BIN_WIDTH = {DIST_PMHG: 10.0, LAG: 40.0}


@dataclass
class HierarchyBinning:
    axis: str
    bin_width: float
    bins: list[tuple[float, float, list[str]]]  # (lower, upper, member electrode ids)
    bin_centers: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.bins)


def bin_electrodes(metas: list[ElectrodeMeta], axis: str, bin_width: float | None = None) -> HierarchyBinning:
    """Assign each electrode to bin floor(value / bin_width); empty bins dropped."""
    if axis not in (DIST_PMHG, LAG):
        raise ValueError(f"unknown hierarchy axis {axis!r}")
    if bin_width is None:
        bin_width = DEFAULT_BIN_WIDTH[axis]
    if bin_width <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    members: dict[int, list[str]] = {}
    skipped = 0
    for m in metas:
        value = m.dist_pmhg_mm if axis == DIST_PMHG else m.lag_ms
        if value is None or not np.isfinite(value):
            skipped += 1
            continue
        members.setdefault(int(np.floor(value / bin_width)), []).append(m.electrode_id)
    if skipped:
        warnings.warn(f"{skipped} electrodes without a finite {axis} value were excluded")
    if not members:
        raise ValueError(f"no electrodes carry a value on axis {axis}")
    bins = [(k * bin_width, (k + 1) * bin_width, members[k]) for k in sorted(members)]
    centers = np.array([(lo + hi) / 2.0 for lo, hi, _ in bins])
    return HierarchyBinning(axis=axis, bin_width=float(bin_width), bins=bins, bin_centers=centers)


def normalize_layer_scores(scores: np.ndarray) -> np.ndarray:
    """Min-max normalization over layers; raises on a constant (or near-empty) vector."""
    scores = np.asarray(scores, dtype=np.float64)
    finite = scores[np.isfinite(scores)]
    if finite.size < 2:
        raise ZeroVarianceError("fewer than two finite layer scores")
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        raise ZeroVarianceError("constant layer scores carry no layer preference")
    return (scores - lo) / (hi - lo)


@dataclass
class BinProfiles:
    """Per-bin average normalized layer profile, aligned with `binning.bins`."""

    binning: HierarchyBinning
    profiles: np.ndarray  # (n_bins, n_layers)
    n_excluded_electrodes: int
    dropped_bins: list[int]  # original bin indices emptied by exclusions


def bin_profile(binning: HierarchyBinning, encoding: EncodingResult) -> BinProfiles:
    """Elementwise mean of member electrodes' normalized layer scores per bin."""
    row_of = {e: i for i, e in enumerate(encoding.electrode_ids)}
    n_layers = encoding.n_layers
    kept_bins = []
    kept_centers = []
    profiles = []
    dropped = []
    excluded = 0
    for bin_idx, (lo, hi, ids) in enumerate(binning.bins):
        rows = []
        for e in ids:
            if e not in row_of:
                excluded += 1
                continue
            try:
                rows.append(normalize_layer_scores(encoding.scores[row_of[e]]))
            except ZeroVarianceError:
                excluded += 1
        if not rows:
            dropped.append(bin_idx)
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=RuntimeWarning)
            profile = np.nanmean(np.vstack(rows), axis=0)
        if not np.all(np.isfinite(profile)):
            dropped.append(bin_idx)
            continue
        kept_bins.append((lo, hi, ids))
        kept_centers.append((lo + hi) / 2.0)
        profiles.append(profile)
    if not profiles:
        raise ValueError("all bins emptied by exclusions")
    if excluded:
        warnings.warn(f"{excluded} electrodes excluded from bin profiles (missing or constant scores)")
    reduced = HierarchyBinning(
        axis=binning.axis, bin_width=binning.bin_width, bins=kept_bins, bin_centers=np.array(kept_centers)
    )
    return BinProfiles(
        binning=reduced,
        profiles=np.vstack(profiles).reshape(len(profiles), n_layers),
        n_excluded_electrodes=excluded,
        dropped_bins=dropped,
    )


def center_of_mass(profile: np.ndarray) -> float:
    """Weighted mean layer index (1-based) of a non-negative layer profile."""
    profile = np.asarray(profile, dtype=np.float64)
    if profile.ndim != 1 or profile.size == 0:
        raise ValueError("profile must be a non-empty 1-D array")
    if np.any(profile < 0) or not np.all(np.isfinite(profile)):
        raise ValueError("profile weights must be finite and non-negative")
    total = profile.sum()
    if total <= 0:
        raise ValueError("all-zero profile has no center of mass")
    layers = np.arange(1, profile.size + 1, dtype=np.float64)
    return float((layers @ profile) / total)


def hierarchy_alignment(coms: np.ndarray, positions: np.ndarray) -> CorrelationResult:
    """Pearson correlation between per-bin center of mass and bin position."""
    coms = np.asarray(coms, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if coms.size != positions.size:
        raise ValueError("coms and positions length mismatch")
    if coms.size < 3:
        raise ValueError(f"need at least 3 bins, got {coms.size}")
    return pearson(positions, coms)


@dataclass
class AlignmentReport:
    model_id: str
    axis: str
    per_bin_com: np.ndarray
    bin_positions: np.ndarray
    alignment_r: float
    alignment_p: float
    n_excluded_electrodes: int = 0


def compute_alignment(binning: HierarchyBinning, encoding: EncodingResult) -> tuple[AlignmentReport, BinProfiles]:
    """Full per-model pipeline: profiles -> center of mass -> alignment correlation."""
    bp = bin_profile(binning, encoding)
    coms = np.array([center_of_mass(p) for p in bp.profiles])
    corr = hierarchy_alignment(coms, bp.binning.bin_centers)
    report = AlignmentReport(
        model_id=encoding.model_id,
        axis=binning.axis,
        per_bin_com=coms,
        bin_positions=bp.binning.bin_centers,
        alignment_r=corr.r,
        alignment_p=corr.p,
        n_excluded_electrodes=bp.n_excluded_electrodes,
    )
    return report, bp


def trf_peak_lag(
    stimulus_envelope: RecordingTrace,
    response: RecordingTrace,
    max_lag_ms: float = 400.0,
    lambdas=DEFAULT_LAMBDAS,
) -> float:
    """Lag (ms) of the largest-magnitude coefficient of a lagged ridge filter.

    The filter predicts the response from the stimulus envelope over lags
    0..max_lag_ms, with the penalty chosen by GCV on the whole trace.
    """
    if stimulus_envelope.fs_hz != response.fs_hz:
        raise ValueError("stimulus and response sampling rates differ")
    if stimulus_envelope.samples.size != response.samples.size:
        raise ValueError("stimulus and response lengths differ")
    fs = stimulus_envelope.fs_hz
    n_lags = int(np.floor(max_lag_ms / 1000.0 * fs + 1e-9)) + 1
    if n_lags < 2:
        raise ValueError(f"max_lag_ms {max_lag_ms} shorter than one sample at {fs} Hz")
    stim = stimulus_envelope.samples
    resp = response.samples
    n = stim.size
    if n - (n_lags - 1) < 2 * n_lags:
        raise ValueError("trace too short for the requested lag range")
    if np.ptp(resp) == 0:
        raise ZeroVarianceError("constant response")
    rows = np.arange(n_lags - 1, n)
    design = np.empty((rows.size, n_lags))
    for j in range(n_lags):
        design[:, j] = stim[rows - j]
    coef, _, _ = gcv_ridge_fit(design, resp[rows], lambdas=lambdas)
    peak = int(np.argmax(np.abs(coef)))
    return peak / fs * 1000.0
