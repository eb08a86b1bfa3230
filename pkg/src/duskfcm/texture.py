"""Gray-level co-occurrence matrices and the 22-feature texture descriptor."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataio import QuantizedImage
from .errors import BadConfig, BadWindow, EmptyList, OffsetTooLarge, WindowLargerThanImage

FEATURE_NAMES = (
    "autocorrelation",
    "contrast",
    "correlation_1",
    "correlation_2",
    "cluster_prominence",
    "cluster_shade",
    "dissimilarity",
    "energy",
    "entropy",
    "homogeneity_1",
    "homogeneity_2",
    "max_probability",
    "sum_of_squares_variance",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "difference_variance",
    "difference_entropy",
    "info_measure_corr_1",
    "info_measure_corr_2",
    "inverse_difference_normalized",
    "inverse_difference_moment_normalized",
)
N_FEATURES = len(FEATURE_NAMES)

DEFAULT_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))

# rows of per-pixel GLCMs processed at once in the windowed map
_CHUNK = 8192


@dataclass(frozen=True)
class GlcmConfig:
    """GLCM parameters.

    Offsets are ``(dx, dy)``: column then row displacement. ``window`` is the
    odd side length used for per-pixel maps; 0 means global only.
    """

    levels: int = 8
    offsets: tuple = DEFAULT_OFFSETS
    symmetric: bool = True
    window: int = 11

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(tuple(int(v) for v in o) for o in self.offsets))
        if self.levels < 2:
            raise BadConfig(f"levels must be >= 2, got {self.levels}")
        if not self.offsets:
            raise BadConfig("at least one offset is required")
        if any(len(o) != 2 or o == (0, 0) for o in self.offsets):
            raise BadConfig(f"offsets must be non-zero (dx, dy) pairs: {self.offsets}")
        if self.window < 0 or (self.window and self.window % 2 == 0):
            raise BadConfig(f"window must be odd or 0, got {self.window}")


@dataclass(frozen=True)
class Glcm:
    p: np.ndarray  # (L, L) probabilities
    pair_count: int
    counts: np.ndarray = field(repr=False)  # raw integer counts before normalization


def _pair_slices(shape, dx, dy):
    h, w = shape
    if abs(dx) >= w or abs(dy) >= h:
        return None
    rows_a = slice(max(0, -dy), h - max(0, dy))
    cols_a = slice(max(0, -dx), w - max(0, dx))
    rows_b = slice(max(0, dy), h - max(0, -dy))
    cols_b = slice(max(0, dx), w - max(0, -dx))
    return (rows_a, cols_a), (rows_b, cols_b)


def compute_glcm(img: QuantizedImage, cfg: GlcmConfig, offset_index: int = 0) -> Glcm:
    """Co-occurrence matrix of ``img`` for ``cfg.offsets[offset_index]``.

    Pairs are (pixel, pixel + offset) with both ends inside the image. When
    ``cfg.symmetric`` the transposed counts are added before normalizing.
    """
    data = np.asarray(img.data)
    levels = cfg.levels
    if data.size and (data.min() < 0 or data.max() >= levels):
        raise BadConfig(f"image values must lie in [0, {levels})")
    dx, dy = cfg.offsets[offset_index]
    slices = _pair_slices(data.shape, dx, dy)
    if slices is None:
        raise OffsetTooLarge(f"offset {(dx, dy)} has no pair inside a {data.shape} image")
    a = data[slices[0]].ravel()
    b = data[slices[1]].ravel()
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    if cfg.symmetric:
        counts = counts + counts.T
    total = int(counts.sum())
    return Glcm(p=counts / total, pair_count=total, counts=counts)


def _entropy(p, axes):
    # 0 * log 0 := 0
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(p * np.log(safe), axis=axes)


def texture_features(glcm) -> np.ndarray:
    """The 22 texture statistics of a normalized GLCM.

    Accepts a :class:`Glcm` or an array whose last two axes are ``(L, L)``;
    leading axes are treated as a batch. Gray-level indices are 1-based.
    Correlation and information-correlation features are 0 when their
    denominators vanish.
    """
    p = glcm.p if isinstance(glcm, Glcm) else np.asarray(glcm, dtype=float)
    batch_shape = p.shape[:-2]
    L = p.shape[-1]
    p = p.reshape(-1, L, L)

    idx = np.arange(1, L + 1, dtype=float)
    i = idx[:, None]
    j = idx[None, :]
    diff = i - j
    absdiff = np.abs(diff)

    px = p.sum(axis=2)
    py = p.sum(axis=1)
    mu_x = px @ idx
    mu_y = py @ idx
    var_x = np.sum(px * (idx[None, :] - mu_x[:, None]) ** 2, axis=1)
    var_y = np.sum(py * (idx[None, :] - mu_y[:, None]) ** 2, axis=1)
    sd_prod = np.sqrt(var_x * var_y)
    degenerate = sd_prod <= 1e-12
    denom = np.where(degenerate, 1.0, sd_prod)

    # p_{x+y}(k), k = 2..2L and p_{x-y}(k), k = 0..L-1
    sum_idx = (np.arange(L)[:, None] + np.arange(L)[None, :]).ravel()
    dif_idx = np.abs(np.arange(L)[:, None] - np.arange(L)[None, :]).ravel()
    flat = p.reshape(p.shape[0], -1)
    sum_onehot = np.zeros((L * L, 2 * L - 1))
    sum_onehot[np.arange(L * L), sum_idx] = 1.0
    dif_onehot = np.zeros((L * L, L))
    dif_onehot[np.arange(L * L), dif_idx] = 1.0
    p_sum = flat @ sum_onehot
    p_dif = flat @ dif_onehot
    k_sum = np.arange(2, 2 * L + 1, dtype=float)
    k_dif = np.arange(L, dtype=float)

    autocorrelation = np.sum(p * (i * j), axis=(1, 2))
    contrast = np.sum(p * diff**2, axis=(1, 2))
    centered = (i[None] - mu_x[:, None, None]) * (j[None] - mu_y[:, None, None])
    corr1 = np.where(degenerate, 0.0, np.sum(p * centered, axis=(1, 2)) / denom)
    corr2 = np.where(degenerate, 0.0, (autocorrelation - mu_x * mu_y) / denom)
    shift = i[None] + j[None] - mu_x[:, None, None] - mu_y[:, None, None]
    prominence = np.sum(p * shift**4, axis=(1, 2))
    shade = np.sum(p * shift**3, axis=(1, 2))
    dissimilarity = np.sum(p * absdiff, axis=(1, 2))
    energy = np.sum(p**2, axis=(1, 2))
    entropy = _entropy(p, (1, 2))
    homogeneity1 = np.sum(p / (1.0 + absdiff), axis=(1, 2))
    homogeneity2 = np.sum(p / (1.0 + diff**2), axis=(1, 2))
    max_prob = p.max(axis=(1, 2))
    sum_squares = var_x
    sum_average = p_sum @ k_sum
    sum_variance = np.sum(p_sum * (k_sum[None, :] - sum_average[:, None]) ** 2, axis=1)
    sum_entropy = _entropy(p_sum, 1)
    dif_mean = p_dif @ k_dif
    dif_variance = np.sum(p_dif * (k_dif[None, :] - dif_mean[:, None]) ** 2, axis=1)
    dif_entropy = _entropy(p_dif, 1)

    hx = _entropy(px, 1)
    hy = _entropy(py, 1)
    outer = px[:, :, None] * py[:, None, :]
    safe_outer = np.where(outer > 0, outer, 1.0)
    hxy1 = -np.sum(p * np.log(safe_outer), axis=(1, 2))
    hxy2 = _entropy(outer, (1, 2))
    hmax = np.maximum(hx, hy)
    imc1 = np.where(hmax > 0, (entropy - hxy1) / np.where(hmax > 0, hmax, 1.0), 0.0)
    imc2 = np.sqrt(np.clip(1.0 - np.exp(-2.0 * (hxy2 - entropy)), 0.0, None))

    inn = np.sum(p / (1.0 + absdiff / L), axis=(1, 2))
    idmn = np.sum(p / (1.0 + diff**2 / L**2), axis=(1, 2))

    out = np.stack(
        [
            autocorrelation, contrast, corr1, corr2, prominence, shade,
            dissimilarity, energy, entropy, homogeneity1, homogeneity2, max_prob,
            sum_squares, sum_average, sum_variance, sum_entropy, dif_variance,
            dif_entropy, imc1, imc2, inn, idmn,
        ],
        axis=-1,
    )
    return out.reshape(*batch_shape, N_FEATURES)


def average_over_offsets(features: Sequence) -> np.ndarray:
    if len(features) == 0:
        raise EmptyList("need at least one feature vector")
    stacked = np.stack([np.asarray(f, dtype=float) for f in features])
    return stacked.mean(axis=0)


def global_texture(img: QuantizedImage, cfg: GlcmConfig) -> np.ndarray:
    """Offset-averaged 22-feature descriptor of the whole image."""
    return average_over_offsets(
        [texture_features(compute_glcm(img, cfg, k)) for k in range(len(cfg.offsets))]
    )


def _box_counts(codes, n_codes, out_shape, box_h, box_w, row0, col0):
    """Per-position histograms of ``codes`` over ``box_h x box_w`` rectangles.

    The rectangle for output position (y, x) starts at (y + row0, x + col0).
    Integer integral images keep the counts exact.
    """
    h, w = out_shape
    counts = np.empty((h, w, n_codes), dtype=np.int32)
    for v in range(n_codes):
        integral = np.zeros((codes.shape[0] + 1, codes.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(codes == v, axis=0), axis=1, out=integral[1:, 1:])
        r0, c0 = row0, col0
        r1, c1 = row0 + box_h, col0 + box_w
        counts[:, :, v] = (
            integral[r1:r1 + h, c1:c1 + w]
            - integral[r0:r0 + h, c1:c1 + w]
            - integral[r1:r1 + h, c0:c0 + w]
            + integral[r0:r0 + h, c0:c0 + w]
        )
    return counts


def windowed_texture_map(img: QuantizedImage, cfg: GlcmConfig) -> np.ndarray:
    """Per-pixel texture descriptor over a ``cfg.window`` square neighbourhood.

    The image is edge-replicated so each pixel sees a full window; features
    are averaged over ``cfg.offsets``. Returns an ``(H, W, 22)`` array.
    """
    win = cfg.window
    if win < 3 or win % 2 == 0:
        raise BadWindow(f"windowed texture needs an odd window >= 3, got {win}")
    data = np.asarray(img.data, dtype=np.int64)
    h, w = data.shape
    if win > h or win > w:
        raise WindowLargerThanImage(f"window {win} exceeds image {data.shape}")
    L = cfg.levels
    r = win // 2
    padded = np.pad(data, r, mode="edge")
    acc = np.zeros((h * w, N_FEATURES))
    for dx, dy in cfg.offsets:
        if abs(dx) >= win or abs(dy) >= win:
            raise OffsetTooLarge(f"offset {(dx, dy)} does not fit a {win}x{win} window")
        codes = np.full(padded.shape, -1, dtype=np.int64)
        (ra, ca), (rb, cb) = _pair_slices(padded.shape, dx, dy)
        codes[ra, ca] = padded[ra, ca] * L + padded[rb, cb]
        box_h, box_w = win - abs(dy), win - abs(dx)
        counts = _box_counts(codes, L * L, (h, w), box_h, box_w, max(0, -dy), max(0, -dx))
        counts = counts.reshape(h * w, L, L)
        total = box_h * box_w * (2 if cfg.symmetric else 1)
        for start in range(0, h * w, _CHUNK):
            block = counts[start:start + _CHUNK].astype(np.float64)
            if cfg.symmetric:
                block = block + block.transpose(0, 2, 1)
            acc[start:start + _CHUNK] += texture_features(block / total)
    acc /= len(cfg.offsets)
    return acc.reshape(h, w, N_FEATURES)


def write_feature_csv(path, features: np.ndarray, names: Sequence[str] = FEATURE_NAMES) -> None:
    """Dump a per-pixel feature map as ``pixel, <names...>`` rows."""
    flat = np.asarray(features).reshape(-1, len(names))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pixel", *names])
        for k, row in enumerate(flat):
            writer.writerow([k, *(repr(float(v)) for v in row)])
