"""Per-pixel color descriptors and per-band histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadBinCount, BadWindow, WindowLargerThanImage

COLOR_NAMES = (
    "R", "G", "B",
    "mean_R", "mean_G", "mean_B",
    "std_R", "std_G", "std_B",
)
CHANNELS = {"R": 0, "G": 1, "B": 2}


@dataclass(frozen=True)
class ChannelHistogram:
    bins: np.ndarray
    bin_count: int
    channel: str


def channel_histogram(img: np.ndarray, channel, bin_count: int = 16) -> ChannelHistogram:
    if bin_count < 1 or 256 % bin_count:
        raise BadBinCount(f"bin_count must divide 256, got {bin_count}")
    ch = CHANNELS[channel] if isinstance(channel, str) else int(channel)
    name = channel if isinstance(channel, str) else "RGB"[ch]
    values = np.asarray(img)[..., ch].astype(np.int64).ravel()
    bins = np.bincount(values // (256 // bin_count), minlength=bin_count)
    return ChannelHistogram(bins=bins, bin_count=bin_count, channel=name)


def _window_sums(plane: np.ndarray, window: int) -> np.ndarray:
    """Exact integer box sums over a replicate-padded plane."""
    r = window // 2
    padded = np.pad(plane, r, mode="edge")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=integral[1:, 1:])
    h, w = plane.shape
    return (
        integral[window:window + h, window:window + w]
        - integral[:h, window:window + w]
        - integral[window:window + h, :w]
        + integral[:h, :w]
    )


def color_feature_map(img: np.ndarray, window: int = 5) -> np.ndarray:
    """Raw RGB plus windowed mean and population std per channel, all scaled by 1/255.

    Returns an ``(H, W, 9)`` array ordered as :data:`COLOR_NAMES`.
    """
    if window < 1 or window % 2 == 0:
        raise BadWindow(f"color window must be odd and >= 1, got {window}")
    rgb = np.asarray(img).astype(np.int64)
    h, w = rgb.shape[:2]
    if window > h or window > w:
        raise WindowLargerThanImage(f"window {window} exceeds image {(h, w)}")
    n = window * window
    out = np.empty((h, w, 9))
    for c in range(3):
        plane = rgb[..., c]
        s1 = _window_sums(plane, window)
        s2 = _window_sums(plane * plane, window)
        # n^2 * variance, exact in integers: zero iff the window is constant
        scaled_var = n * s2 - s1 * s1
        out[..., c] = plane / 255.0
        out[..., 3 + c] = s1 / (n * 255.0)
        out[..., 6 + c] = np.sqrt(scaled_var) / (n * 255.0)
    return out
