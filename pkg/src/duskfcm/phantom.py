"""Synthetic noisy disk phantoms with exact ground truth."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataio import save_mask, save_rgb

FOREGROUND = 200
BACKGROUND = 80
# green/blue scale of the foreground so the lesion is reddish; background is gray
LESION_TINT = (1.0, 0.6, 0.6)


def disk_mask(size, center, radius) -> np.ndarray:
    h, w = (size, size) if np.isscalar(size) else size
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius**2


def add_salt_and_pepper(img: np.ndarray, fraction: float, rng) -> np.ndarray:
    out = img.copy()
    h, w = img.shape[:2]
    n = int(round(fraction * h * w))
    flat = rng.choice(h * w, size=n, replace=False)
    salt = rng.random(n) < 0.5
    rows, cols = np.unravel_index(flat, (h, w))
    out[rows[salt], cols[salt]] = 255
    out[rows[~salt], cols[~salt]] = 0
    return out


def disk_phantom(size=128, center=None, radius=None, noise_sigma=20.0,
                 salt_pepper=0.05, seed=0):
    """Noisy RGB disk on a flat background and its ground-truth mask.

    The disk has intensity 200 (tinted red), the background 80; Gaussian
    noise of ``noise_sigma`` is added per channel, then a ``salt_pepper``
    fraction of pixels is forced to 0 or 255.
    """
    rng = np.random.default_rng(seed)
    if center is None:
        center = (size / 2 - 0.5, size / 2 - 0.5)
    if radius is None:
        radius = size / 4
    mask = disk_mask(size, center, radius)
    base = np.where(mask, FOREGROUND, BACKGROUND).astype(float)
    tint = np.where(mask[..., None], np.array(LESION_TINT), 1.0)
    rgb = base[..., None] * tint
    rgb = rgb + rng.normal(0.0, noise_sigma, size=rgb.shape)
    rgb = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    rgb = add_salt_and_pepper(rgb, salt_pepper, rng)
    return rgb, mask


def write_phantom_dataset(root, count=20, size=128, seed=0, noise_sigma=20.0,
                          salt_pepper=0.05) -> Path:
    """Write ``count`` phantoms as ``root/images/phantom_XXX.png`` plus masks."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        radius = rng.uniform(0.15, 0.3) * size
        margin = radius + 2
        center = (rng.uniform(margin, size - margin), rng.uniform(margin, size - margin))
        rgb, mask = disk_phantom(size, center, radius, noise_sigma, salt_pepper,
                                 seed=int(rng.integers(2**31)))
        save_rgb(rgb, root / "images" / f"phantom_{i:03d}.png")
        save_mask(mask, root / "masks" / f"phantom_{i:03d}.png")
    return root
