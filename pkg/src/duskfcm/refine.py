"""Coarse-mask refinement: seeded region growing, closing and speckle removal.

A refiner is any callable ``(coarse, lesion_index, fm, dims) -> mask``; the
pipeline looks them up by name in :data:`REFINERS`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import BadConfig, EmptySeeds

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
# neighbour visiting order for the BFS: up, down, left, right
_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class RefineConfig:
    grow_threshold: float = 1.5
    min_area: Optional[int] = None  # None: 0.1% of the image
    closing_radius: int = 2
    seed_quantile: float = 0.9

    def __post_init__(self):
        if self.grow_threshold < 0:
            raise BadConfig("grow_threshold must be >= 0")
        if self.min_area is not None and self.min_area < 0:
            raise BadConfig("min_area must be >= 0")
        if self.closing_radius < 0:
            raise BadConfig("closing_radius must be >= 0")
        if not 0 < self.seed_quantile <= 1:
            raise BadConfig("seed_quantile must lie in (0, 1]")

    def area_for(self, dims) -> int:
        if self.min_area is not None:
            return int(self.min_area)
        return int(np.ceil(0.001 * dims[0] * dims[1]))


@dataclass(frozen=True)
class ComponentStats:
    id: int
    area: int
    bbox: tuple  # (row0, col0, row1, col1), end-exclusive
    mean_membership: float


def region_grow(fm, seeds, cfg: RefineConfig, dims) -> np.ndarray:
    """Breadth-first 4-connected growth from ``seeds``.

    A candidate joins when its feature vector lies within
    ``cfg.grow_threshold`` (Euclidean) of the running mean of the region
    grown so far. Seeds are queued in row-major order.
    """
    h, w = dims
    x = fm.values if hasattr(fm, "values") else np.asarray(fm, dtype=float)
    x = x.reshape(h * w, -1)
    seeds = np.asarray(seeds, dtype=bool).reshape(h, w)
    if not seeds.any():
        raise EmptySeeds("region growing needs at least one seed pixel")
    grown = seeds.copy()
    flat_seeds = np.flatnonzero(seeds.ravel())
    total = x[flat_seeds].sum(axis=0)
    count = flat_seeds.size
    tau = cfg.grow_threshold
    queue = deque(flat_seeds.tolist())
    while queue:
        k = queue.popleft()
        r, c = divmod(k, w)
        for dr, dc in _STEPS:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < h and 0 <= cc < w) or grown[rr, cc]:
                continue
            j = rr * w + cc
            if np.linalg.norm(x[j] - total / count) <= tau:
                grown[rr, cc] = True
                total = total + x[j]
                count += 1
                queue.append(j)
    return grown


def label_components(mask: np.ndarray):
    return ndimage.label(np.asarray(mask, dtype=bool), structure=FOUR_CONNECTED)


def remove_small_components(mask: np.ndarray, min_area: int) -> np.ndarray:
    """Drop 4-connected true components smaller than ``min_area`` pixels."""
    labels, n = label_components(mask)
    if n == 0:
        return np.asarray(mask, dtype=bool).copy()
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def component_stats(mask: np.ndarray, membership: Optional[np.ndarray] = None) -> list:
    labels, n = label_components(mask)
    stats = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        region = labels[sl] == i
        mean_u = float(membership[sl][region].mean()) if membership is not None else float("nan")
        stats.append(
            ComponentStats(
                id=i,
                area=int(region.sum()),
                bbox=(sl[0].start, sl[1].start, sl[0].stop, sl[1].stop),
                mean_membership=mean_u,
            )
        )
    return stats


def disk(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return yy**2 + xx**2 <= radius**2


def morphological_close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilation then erosion with a disk; the image is zero-padded so the
    border does not erode pixels the closing should keep."""
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    pad = 2 * radius + 1
    padded = np.pad(mask, pad)
    closed = ndimage.binary_closing(padded, structure=disk(radius))
    return closed[pad:-pad, pad:-pad]


def seed_pixels(coarse, lesion_index: int, dims, quantile: float) -> np.ndarray:
    """Lesion-labelled pixels whose lesion membership reaches the given quantile."""
    u = coarse.memberships
    lesion = (np.argmax(u, axis=0) == lesion_index)
    if not lesion.any():
        raise EmptySeeds(f"no pixel is labelled with cluster {lesion_index}")
    values = u[lesion_index, lesion]
    cut = np.quantile(values, quantile)
    seeds = lesion & (u[lesion_index] >= cut)
    return seeds.reshape(dims)


def refine_mask(coarse, lesion_index: int, fm, cfg: RefineConfig, dims) -> np.ndarray:
    """Seeded growth, then closing, then removal of components below ``min_area``."""
    seeds = seed_pixels(coarse, lesion_index, dims, cfg.seed_quantile)
    grown = region_grow(fm, seeds, cfg, dims)
    closed = morphological_close(grown, cfg.closing_radius)
    return remove_small_components(closed, cfg.area_for(dims))


def coarse_mask(coarse, lesion_index: int, dims) -> np.ndarray:
    return (np.argmax(coarse.memberships, axis=0) == lesion_index).reshape(dims)


def _no_refine(coarse, lesion_index, fm, dims, cfg=None):
    return coarse_mask(coarse, lesion_index, dims)


def _region_grow_refiner(coarse, lesion_index, fm, dims, cfg=None):
    return refine_mask(coarse, lesion_index, fm, cfg or RefineConfig(), dims)


REFINERS = {
    "region_grow": _region_grow_refiner,
    "none": _no_refine,
}
