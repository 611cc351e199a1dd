import json

import cv2
import numpy as np
import pytest
import tifffile

from cloud_removal.core.raster import Raster, ScalarField
from cloud_removal.exceptions import ImageIOError
from cloud_removal.utils.constants import NanPolicy
from cloud_removal.utils.image_io import (
    decode_image,
    encode_png,
    read_field,
    read_json,
    read_raster,
    sidecar_path,
    write_field,
    write_json,
    write_raster,
)


def test_float_tiff_keeps_single_precision(tmp_path, rng):
    raster = Raster(rng.uniform(0, 1, (8, 9, 4)))
    path = write_raster(tmp_path / "image.tif", raster)
    assert tifffile.imread(path).dtype == np.float32
    np.testing.assert_array_equal(
        read_raster(path).data, raster.data.astype(np.float32).astype(np.float64)
    )


def test_png_is_16_bit_with_sidecar(tmp_path, rng):
    raster = Raster(rng.uniform(0, 1, (8, 9, 3)))
    path = write_raster(tmp_path / "image.png", raster)
    assert cv2.imread(str(path), cv2.IMREAD_UNCHANGED).dtype == np.uint16
    assert read_json(sidecar_path(path)) == {"scale_factor": 1.0 / 65535.0, "offset": 0.0}
    np.testing.assert_allclose(read_raster(path).data, raster.data, atol=0.5 / 65535.0 + 1e-12)


def test_png_channels_are_read_in_rgb_order(tmp_path):
    samples = np.zeros((4, 4, 3), dtype=np.uint8)
    samples[:, :, 0] = 255
    path = tmp_path / "red.png"
    cv2.imwrite(str(path), np.ascontiguousarray(samples[:, :, ::-1]))
    raster = read_raster(path)
    np.testing.assert_array_equal(raster.data[0, 0], [1.0, 0.0, 0.0])


def test_integer_tiff_uses_sample_range_or_sidecar(tmp_path):
    samples = np.full((4, 4, 2), 1000, dtype=np.uint16)
    path = tmp_path / "dn.tif"
    tifffile.imwrite(path, samples)
    np.testing.assert_allclose(read_raster(path).data, 1000 / 65535.0)

    write_json(sidecar_path(path), {"scale_factor": 1e-4, "offset": 0.05})
    np.testing.assert_allclose(read_raster(path).data, 0.15)
    np.testing.assert_allclose(read_raster(path, scale=2e-4).data, 0.2)


def test_out_of_range_and_nan_samples(tmp_path):
    data = np.array([[[np.nan, 1.5, 0.2]]], dtype=np.float32)
    path = tmp_path / "raw.tif"
    tifffile.imwrite(path, data)
    np.testing.assert_allclose(read_raster(path).data[0, 0], [0.0, 1.0, 0.2], atol=1e-7)
    with pytest.raises(ImageIOError):
        read_raster(path, policy=NanPolicy.REJECT)


def test_read_errors(tmp_path):
    with pytest.raises(ImageIOError, match="not found"):
        read_raster(tmp_path / "missing.tif")
    bogus = tmp_path / "bogus.png"
    bogus.write_bytes(b"\x00\x01")
    with pytest.raises(ImageIOError):
        read_raster(bogus)
    other = tmp_path / "image.jpg2"
    other.write_bytes(b"\x00")
    with pytest.raises(ImageIOError, match="Unsupported"):
        read_raster(other)
    sidecar_target = write_raster(tmp_path / "image.tif", Raster(np.zeros((2, 2, 1))))
    sidecar_path(sidecar_target).write_text("{not json", encoding="utf-8")
    with pytest.raises(ImageIOError, match="JSON"):
        read_raster(sidecar_target)


def test_png_rejects_unsupported_band_count(tmp_path):
    with pytest.raises(ImageIOError):
        write_raster(tmp_path / "image.png", Raster(np.zeros((4, 4, 5))))


def test_fields_are_float_tiff(tmp_path, rng):
    field = ScalarField(rng.uniform(0, 1, (6, 7)))
    path = write_field(tmp_path / "t.tif", field)
    np.testing.assert_allclose(read_field(path).data, field.data, atol=1e-7)
    with pytest.raises(ImageIOError):
        write_field(tmp_path / "t.png", field)


def test_write_json_is_stable(tmp_path):
    first = write_json(tmp_path / "a.json", {"b": 1, "a": [1, 2]}).read_bytes()
    second = write_json(tmp_path / "b.json", {"a": [1, 2], "b": 1}).read_bytes()
    assert first == second
    assert json.loads(first) == {"a": [1, 2], "b": 1}
    assert first.endswith(b"\n")


def test_png_bytes_decode_back_to_reflectance(rng):
    raster = Raster(rng.uniform(0, 1, (10, 12, 3)))
    decoded = decode_image(encode_png(raster))
    assert decoded.shape == (10, 12, 3)
    np.testing.assert_allclose(decoded, np.round(raster.data * 255.0) / 255.0, atol=1e-12)

    gray = decode_image(encode_png(Raster(raster.data[:, :, :1])))
    assert gray.shape == (10, 12, 1)
    with pytest.raises(ValueError):
        encode_png(Raster(np.zeros((4, 4, 2))))
    with pytest.raises(ImageIOError):
        decode_image(b"garbage")
