import numpy as np
import pytest
from PIL import Image

from duskfcm.dataio import (
    index_dataset,
    load_mask,
    load_rgb,
    mask_to_image,
    quantize,
    save_mask,
    to_grayscale,
)
from duskfcm.errors import BadLevelCount, DecodeError, DimensionMismatch, EmptyDataset, MissingImagesDir


def _png(path, value, size=(4, 3), mode="RGB"):
    arr = np.full((size[1], size[0], 3) if mode == "RGB" else (size[1], size[0]), value, dtype=np.uint8)
    Image.fromarray(arr, mode=mode).save(path)


def test_index_pairs_masks_by_stem(tmp_path):
    (tmp_path / "images").mkdir()
    (tmp_path / "masks").mkdir()
    _png(tmp_path / "images" / "b.png", 10)
    _png(tmp_path / "images" / "a.png", 10)
    _png(tmp_path / "masks" / "a.png", 255, mode="L")
    index = index_dataset(tmp_path)
    assert [s.id for s in index] == ["a", "b"]
    assert index.samples[0].mask is not None
    assert index.samples[1].mask is None


def test_index_kvasir_layout_all_paired(tmp_path):
    (tmp_path / "images").mkdir()
    (tmp_path / "masks").mkdir()
    stems = ["cju0qkwl35piu0993l0dewei2", "cju0qoxqj9q6s0835b43399p4", "cju0s690hkp960855tjuaqvv0"]
    for s in stems:
        _png(tmp_path / "images" / f"{s}.jpg", 90)
        _png(tmp_path / "masks" / f"{s}.jpg", 255)
    index = index_dataset(tmp_path)
    assert len(index.with_masks) == 3
    assert [s.id for s in index] == sorted(stems)


def test_index_is_deterministic(tmp_path):
    (tmp_path / "images").mkdir()
    for name in ["z", "m", "a", "q"]:
        _png(tmp_path / "images" / f"{name}.png", 1)
    assert index_dataset(tmp_path) == index_dataset(tmp_path)


def test_index_errors(tmp_path):
    with pytest.raises(MissingImagesDir):
        index_dataset(tmp_path)
    (tmp_path / "images").mkdir()
    with pytest.raises(EmptyDataset):
        index_dataset(tmp_path)


@pytest.mark.parametrize(
    "rgb, expected",
    [((255, 255, 255), 255), ((0, 0, 0), 0), ((100, 150, 200), 141)],
)
def test_to_grayscale(rgb, expected):
    img = np.array([[rgb]], dtype=np.uint8)
    assert to_grayscale(img)[0, 0] == expected


@pytest.mark.parametrize("value, levels, expected", [(255, 8, 7), (0, 8, 0), (0, 2, 0), (0, 256, 0), (128, 8, 4)])
def test_quantize(value, levels, expected):
    assert quantize(np.array([[value]], dtype=np.uint8), levels).data[0, 0] == expected


def test_quantize_surjective_and_identity():
    ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
    for levels in (2, 8, 16, 256):
        assert set(np.unique(quantize(ramp, levels).data)) == set(range(levels))
    rgb = np.random.default_rng(0).integers(0, 256, (9, 7, 3), dtype=np.uint8)
    gray = to_grayscale(rgb)
    np.testing.assert_array_equal(quantize(gray, 256).data, gray)


@pytest.mark.parametrize("levels", [1, 257])
def test_quantize_rejects_bad_levels(levels):
    with pytest.raises(BadLevelCount):
        quantize(np.zeros((2, 2), dtype=np.uint8), levels)


@pytest.mark.parametrize("value, expected", [(255, True), (0, False), (128, True), (127, False)])
def test_load_mask_threshold(tmp_path, value, expected):
    path = tmp_path / "m.png"
    _png(path, value, mode="L")
    mask = load_mask(path)
    assert mask.shape == (3, 4)
    assert mask.all() == expected and mask.any() == expected


def test_load_mask_dimension_check(tmp_path):
    path = tmp_path / "m.png"
    _png(path, 255, mode="L")
    with pytest.raises(DimensionMismatch):
        load_mask(path, expected_shape=(5, 5, 3))


def test_decode_error(tmp_path):
    bad = tmp_path / "x.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(DecodeError):
        load_mask(bad)
    with pytest.raises(DecodeError):
        load_rgb(bad)


def test_mask_round_trip(tmp_path):
    mask = np.random.default_rng(3).random((13, 17)) > 0.5
    save_mask(mask, tmp_path / "m.png")
    np.testing.assert_array_equal(load_mask(tmp_path / "m.png"), mask)
    assert mask_to_image(mask).mode == "L"
