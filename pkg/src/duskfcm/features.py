"""Feature fusion, standardization and correlation-based feature selection."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .colorfeat import COLOR_NAMES
from .errors import BadConfig, DimensionMismatch, DuskfcmError, SingleClassLabels
from .texture import FEATURE_NAMES

FUSED_NAMES = COLOR_NAMES + FEATURE_NAMES

# consecutive non-improving expansions before the search gives up
CFS_MAX_STALE = 5


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n, d)
    names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise BadConfig(f"feature matrix must be 2-D, got shape {values.shape}")
        names = tuple(self.names)
        if len(names) != values.shape[1] or len(set(names)) != len(names):
            raise BadConfig("column names must be unique and match the column count")
        if not np.all(np.isfinite(values)):
            raise DuskfcmError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [nm for nm in names if nm not in self.names]
        if missing:
            raise BadConfig(f"unknown feature names: {missing}")
        cols = [self.names.index(nm) for nm in names]
        return FeatureMatrix(self.values[:, cols], tuple(names))


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple
    merit: float
    names: tuple = ()


def fuse(color_map: np.ndarray, texture_map: np.ndarray,
         color_names=COLOR_NAMES, texture_names=FEATURE_NAMES) -> FeatureMatrix:
    """Stack color columns then texture columns, one row per pixel (row-major)."""
    color_map = np.asarray(color_map)
    texture_map = np.asarray(texture_map)
    if color_map.shape[:2] != texture_map.shape[:2]:
        raise DimensionMismatch(
            f"color map {color_map.shape[:2]} vs texture map {texture_map.shape[:2]}"
        )
    h, w = color_map.shape[:2]
    values = np.concatenate(
        [color_map.reshape(h * w, -1), texture_map.reshape(h * w, -1)], axis=1
    )
    return FeatureMatrix(values, tuple(color_names) + tuple(texture_names))


def zscore(fm: FeatureMatrix) -> FeatureMatrix:
    """Column-wise standardization with population std; constant columns become 0."""
    x = fm.values
    if x.shape[0] < 2:
        raise DuskfcmError("zscore needs at least two rows")
    mean = x.mean(axis=0)
    centered = x - mean
    std = np.sqrt(np.mean(centered**2, axis=0))
    # constant columns can leave rounding-level residue in the std
    flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    out = np.where(flat, 0.0, centered / np.where(flat, 1.0, std))
    return FeatureMatrix(out, fm.names)


def correlation_matrix(x: np.ndarray) -> np.ndarray:
    """Pearson correlations between columns; zero-variance pairs give 0."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=0)
    norms = np.sqrt(np.sum(centered**2, axis=0))
    flat = norms <= 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))
    safe = np.where(flat, 1.0, norms)
    corr = (centered.T @ centered) / np.outer(safe, safe)
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    return np.clip(corr, -1.0, 1.0)


def cfs_merit(subset, class_corr: np.ndarray, feat_corr: np.ndarray) -> float:
    """Merit k*mean|r_cf| / sqrt(k + k(k-1)*mean|r_ff|) of a feature subset."""
    subset = list(subset)
    k = len(subset)
    if k == 0:
        return 0.0
    rcf = np.mean(np.abs(class_corr[subset]))
    if k == 1:
        rff = 0.0
    else:
        block = np.abs(feat_corr[np.ix_(subset, subset)])
        rff = (block.sum() - np.trace(block)) / (k * (k - 1))
    return float(k * rcf / np.sqrt(k + k * (k - 1) * rff))


def _correlations(values: np.ndarray, labels: np.ndarray):
    labels = np.asarray(labels).astype(float).ravel()
    if labels.shape[0] != values.shape[0]:
        raise DimensionMismatch("one label per feature row is required")
    if values.shape[0] < 2 or np.unique(labels).size < 2:
        raise SingleClassLabels("CFS needs both classes present")
    full = correlation_matrix(np.column_stack([values, labels]))
    return full[:-1, -1], full[:-1, :-1]


def cfs_select(fm: FeatureMatrix, labels, max_stale: int = CFS_MAX_STALE) -> SelectionResult:
    """Best-first forward search over feature subsets maximizing the CFS merit.

    The open list is expanded best-first; the search stops once
    ``max_stale`` consecutive expansions fail to improve the best merit.
    Ties prefer the lexicographically smaller (lower-index) subset.
    """
    class_corr, feat_corr = _correlations(fm.values, labels)
    d = fm.d
    best, best_merit = (), 0.0
    visited = {()}
    # heap entries: (-merit, sorted subset)
    open_list = [(-0.0, ())]
    stale = 0
    while open_list and stale < max_stale:
        _, subset = heapq.heappop(open_list)
        improved = False
        for f in range(d):
            if f in subset:
                continue
            child = tuple(sorted(subset + (f,)))
            if child in visited:
                continue
            visited.add(child)
            merit = cfs_merit(child, class_corr, feat_corr)
            heapq.heappush(open_list, (-merit, child))
            # strict improvement only: equal-merit later candidates never displace earlier ones
            if merit > best_merit + 1e-12:
                best, best_merit = child, merit
                improved = True
        stale = 0 if improved else stale + 1
    return SelectionResult(
        indices=best, merit=best_merit, names=tuple(fm.names[i] for i in best)
    )


def exhaustive_best_merit(fm: FeatureMatrix, labels) -> tuple:
    """Brute-force maximum merit over all non-empty subsets (small d only)."""
    class_corr, feat_corr = _correlations(fm.values, labels)
    d = fm.d
    if d > 16:
        raise BadConfig("exhaustive search is limited to 16 features")
    best, best_merit = (), -np.inf
    for mask in range(1, 2**d):
        subset = tuple(f for f in range(d) if mask >> f & 1)
        merit = cfs_merit(subset, class_corr, feat_corr)
        if merit > best_merit:
            best, best_merit = subset, merit
    return best, best_merit
