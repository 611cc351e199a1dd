"""Raster and scalar-field file I/O

PNG (8/16-bit) goes through OpenCV with channels reordered to RGB; TIFF of any
band count and sample type goes through tifffile. Integer images carry a JSON
sidecar ``<file>.json`` holding ``{"scale_factor": s, "offset": o}`` so that
reflectance = sample * s + o.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import cv2
import numpy as np
import tifffile

from cloud_removal.core.raster import Raster, ScalarField
from cloud_removal.exceptions import ImageIOError
from cloud_removal.utils.constants import NanPolicy

logger = logging.getLogger(__name__)

PNG_SUFFIXES = {".png"}
TIFF_SUFFIXES = {".tif", ".tiff"}
RASTER_SUFFIXES = PNG_SUFFIXES | TIFF_SUFFIXES

_INTEGER_SCALES = {np.dtype(np.uint8): 1.0 / 255.0, np.dtype(np.uint16): 1.0 / 65535.0}


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def read_json(path: str | Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ImageIOError(f"Cannot read JSON {path}: {e}") from e


def write_json(path: str | Path, payload: Dict[str, Any]) -> Path:
    """Write JSON with sorted keys so identical payloads give identical bytes"""
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def _read_sidecar(path: Path) -> Optional[Tuple[float, float]]:
    side = sidecar_path(path)
    if not side.exists():
        return None
    payload = read_json(side)
    try:
        return float(payload["scale_factor"]), float(payload.get("offset", 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise ImageIOError(f"Malformed sidecar {side}: {e}") from e


def _reorder_channels(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 3 and arr.shape[2] == 3:
        return cv2.cvtColor(arr, cv2.COLOR_BGR2RGB)
    if arr.ndim == 3 and arr.shape[2] == 4:
        return cv2.cvtColor(arr, cv2.COLOR_BGRA2RGBA)
    return arr


def _read_samples(path: Path) -> np.ndarray:
    suffix = path.suffix.lower()
    if suffix in PNG_SUFFIXES:
        arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise ImageIOError(f"Cannot decode PNG {path}")
        return _reorder_channels(arr)
    if suffix in TIFF_SUFFIXES:
        try:
            return tifffile.imread(path)
        except (OSError, ValueError, tifffile.TiffFileError) as e:
            raise ImageIOError(f"Cannot decode TIFF {path}: {e}") from e
    raise ImageIOError(f"Unsupported raster format '{path.suffix}' for {path}")


def to_reflectance(
    samples: np.ndarray, scale: Optional[float] = None, offset: float = 0.0
) -> np.ndarray:
    """Convert stored samples to reflectance, defaulting by sample type"""
    if scale is None:
        scale = _INTEGER_SCALES.get(samples.dtype, 1.0)
    return samples.astype(np.float64) * scale + offset


def read_raster(
    path: str | Path,
    scale: Optional[float] = None,
    policy: NanPolicy = NanPolicy.CLAMP,
) -> Raster:
    """Read a PNG or TIFF into a Raster in [0, 1]

    Args:
        path: Image file
        scale: Explicit reflectance scale factor, overriding any sidecar
        policy: Handling of non-finite samples

    Returns:
        Raster clipped to [0, 1]
    """
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"Image not found: {path}")

    samples = _read_samples(path)
    offset = 0.0
    if scale is None:
        sidecar = _read_sidecar(path)
        if sidecar is not None:
            scale, offset = sidecar

    if samples.ndim not in (2, 3):
        raise ImageIOError(f"Expected an H×W or H×W×C image in {path}, got {samples.shape}")

    try:
        raster = Raster.from_array(to_reflectance(samples, scale, offset), policy=policy)
    except ValueError as e:
        raise ImageIOError(f"Invalid image data in {path}: {e}") from e
    logger.debug(f"Read {path} as {raster.height}x{raster.width}x{raster.bands}")
    return raster


def write_raster(path: str | Path, raster: Raster) -> Path:
    """Write a Raster as float32 TIFF or 16-bit PNG with sidecar"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in TIFF_SUFFIXES:
        tifffile.imwrite(path, raster.data.astype(np.float32))
    elif suffix in PNG_SUFFIXES:
        if raster.bands not in (1, 3, 4):
            raise ImageIOError(f"PNG holds 1, 3 or 4 bands, raster has {raster.bands}")
        samples = np.round(raster.data * 65535.0).astype(np.uint16)
        if not cv2.imwrite(str(path), _to_bgr(samples)):
            raise ImageIOError(f"Cannot encode PNG {path}")
        write_json(sidecar_path(path), {"scale_factor": 1.0 / 65535.0, "offset": 0.0})
    else:
        raise ImageIOError(f"Unsupported raster format '{path.suffix}' for {path}")
    logger.debug(f"Wrote {path}")
    return path


def _to_bgr(samples: np.ndarray) -> np.ndarray:
    if samples.shape[2] == 1:
        return np.ascontiguousarray(samples[:, :, 0])
    if samples.shape[2] == 3:
        return cv2.cvtColor(samples, cv2.COLOR_RGB2BGR)
    return cv2.cvtColor(samples, cv2.COLOR_RGBA2BGRA)


def read_field(path: str | Path) -> ScalarField:
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"Field not found: {path}")
    data = np.squeeze(_read_samples(path)).astype(np.float64)
    try:
        return ScalarField(data)
    except ValueError as e:
        raise ImageIOError(f"Invalid scalar field in {path}: {e}") from e


def write_field(path: str | Path, field: ScalarField) -> Path:
    """Scalar fields are diagnostics and always go to 32-bit float TIFF"""
    path = Path(path)
    if path.suffix.lower() not in TIFF_SUFFIXES:
        raise ImageIOError(f"Scalar fields are written as TIFF, got {path}")
    tifffile.imwrite(path, field.data.astype(np.float32))
    logger.debug(f"Wrote {path}")
    return path


def encode_png(raster: Raster) -> bytes:
    """8-bit PNG bytes of a 1- or 3-band raster"""
    if raster.bands not in (1, 3):
        raise ValueError(f"Only 1- or 3-band rasters can be PNG-encoded, got {raster.bands}")
    samples = np.round(raster.data * 255.0).astype(np.uint8)
    ok, buffer = cv2.imencode(".png", _to_bgr(samples))
    if not ok:
        raise ImageIOError("PNG encoding failed")
    return buffer.tobytes()


def decode_image(payload: bytes) -> np.ndarray:
    """Decode PNG/JPEG/TIFF bytes to reflectance, H×W×C in RGB order"""
    buffer = np.frombuffer(payload, dtype=np.uint8)
    arr = cv2.imdecode(buffer, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ImageIOError("Payload is not a decodable image")
    arr = _reorder_channels(arr)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return to_reflectance(arr)
