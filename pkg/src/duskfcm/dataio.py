"""Image/mask decoding, dataset indexing and gray-level planes.

Images travel through the package as plain numpy arrays:

* RGB image   -- ``uint8`` array of shape ``(H, W, 3)``
* gray image  -- ``uint8`` array of shape ``(H, W)``
* binary mask -- ``bool`` array of shape ``(H, W)``

Quantized planes carry their level count alongside the data, so they get
a small wrapper type.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadLevelCount,
    DecodeError,
    DimensionMismatch,
    DuskfcmError,
    EmptyDataset,
    MissingImagesDir,
)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MASK_THRESHOLD = 127


@dataclass(frozen=True)
class QuantizedImage:
    data: np.ndarray  # (H, W) integer, values in [0, levels)
    levels: int

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image: Path
    mask: Optional[Path] = None


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    samples: tuple

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def with_masks(self):
        return [s for s in self.samples if s.mask is not None]


def _by_stem(directory: Path) -> dict:
    found = {}
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        if path.stem in found:
            raise DuskfcmError(
                f"duplicate sample id {path.stem!r} in {directory}"
            )
        found[path.stem] = path
    return found


def index_dataset(root) -> DatasetIndex:
    """Index a Kvasir-SEG style tree: ``root/images`` plus optional ``root/masks``.

    Masks are paired with images by filename stem. Samples are ordered
    lexicographically by id.
    """
    root = Path(root)
    images_dir = root / "images"
    if not images_dir.is_dir():
        raise MissingImagesDir(f"no images/ directory under {root}")
    images = _by_stem(images_dir)
    if not images:
        raise EmptyDataset(f"{images_dir} contains no PNG/JPEG files")
    masks_dir = root / "masks"
    masks = _by_stem(masks_dir) if masks_dir.is_dir() else {}
    samples = tuple(
        SampleRecord(id=stem, image=images[stem], mask=masks.get(stem))
        for stem in sorted(images)
    )
    return DatasetIndex(root=root, samples=samples)


def _open(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, UnidentifiedImageError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return img


def load_rgb(path) -> np.ndarray:
    return np.asarray(_open(path).convert("RGB"), dtype=np.uint8).copy()


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma, rounded half-up, computed in exact integer arithmetic."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img.astype(np.uint8)
    rgb = img.astype(np.int64)
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return np.clip(luma, 0, 255).astype(np.uint8)


def quantize(img: np.ndarray, levels: int) -> QuantizedImage:
    """Map 8-bit values to ``floor(v * levels / 256)``."""
    if not 2 <= levels <= 256:
        raise BadLevelCount(f"levels must lie in [2, 256], got {levels}")
    data = (np.asarray(img, dtype=np.int64) * levels) // 256
    return QuantizedImage(data=data.astype(np.int64), levels=int(levels))


def load_mask(path, expected_shape=None) -> np.ndarray:
    """Binarize a mask image: true where luminance exceeds 127."""
    img = _open(path)
    if img.mode in ("L", "1", "I", "I;16", "F"):
        gray = np.asarray(img.convert("L"))
    else:
        gray = to_grayscale(np.asarray(img.convert("RGB")))
    mask = gray > MASK_THRESHOLD
    if expected_shape is not None and mask.shape != tuple(expected_shape[:2]):
        raise DimensionMismatch(
            f"mask {path} is {mask.shape}, image is {tuple(expected_shape[:2])}"
        )
    return mask


def mask_to_image(mask: np.ndarray) -> Image.Image:
    return Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")


def save_mask(mask: np.ndarray, path) -> None:
    mask_to_image(mask).save(path, format="PNG")


def save_rgb(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path, format="PNG")
