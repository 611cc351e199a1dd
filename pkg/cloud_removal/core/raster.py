"""Image containers and per-pixel statistics shared by every stage"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from cloud_removal.utils.constants import SATURATION_GUARD, NanPolicy

logger = logging.getLogger(__name__)


def _frozen_copy(data: np.ndarray) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Raster:
    """H×W×C reflectance image

    Data is stored band-interleaved as a read-only float64 array of shape (H, W, C).
    A 2-D array is accepted and treated as a single band.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"Raster data must be 2-D or 3-D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"Raster dimensions must be at least 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Raster contains NaN or Inf values")
        object.__setattr__(self, "data", _frozen_copy(arr))

    @classmethod
    def from_array(cls, data: np.ndarray, policy: NanPolicy = NanPolicy.CLAMP) -> "Raster":
        """Build a raster from arbitrary numeric data, enforcing the [0, 1] domain

        Args:
            data: 2-D or 3-D numeric array
            policy: What to do with NaN/Inf samples

        Returns:
            Raster clipped to [0, 1]
        """
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            if policy == NanPolicy.REJECT:
                raise ValueError("Input contains NaN or Inf values")
            bad = int(np.count_nonzero(~np.isfinite(arr)))
            logger.warning(f"Replacing {bad} non-finite samples")
            arr = np.nan_to_num(arr, nan=0.0, posinf=1.0, neginf=0.0)
        return cls(np.clip(arr, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial shape (height, width)"""
        return self.data.shape[0], self.data.shape[1]

    def band(self, index: int) -> "ScalarField":
        return ScalarField(self.data[:, :, index])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """H×W single-channel field (transmission, confidence, weights, probabilities)"""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"ScalarField data must be 2-D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"ScalarField dimensions must be at least 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ScalarField contains NaN or Inf values")
        object.__setattr__(self, "data", _frozen_copy(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class AtmosphericLight:
    """Per-band airlight A"""

    values: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"Atmospheric light must be a non-empty vector, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Atmospheric light contains NaN or Inf values")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError(f"Atmospheric light must lie in [0, 1], got {arr.tolist()}")
        object.__setattr__(self, "values", _frozen_copy(arr))

    @property
    def bands(self) -> int:
        return self.values.size

    def tolist(self) -> list[float]:
        return [float(v) for v in self.values]


def check_same_shape(*items: Union[Raster, ScalarField]) -> None:
    """Raise if the spatial dimensions of the given images differ"""
    shapes = {item.shape for item in items}
    if len(shapes) > 1:
        raise ValueError(f"Dimension mismatch: {sorted(shapes)}")


def check_same_bands(*rasters: Raster) -> None:
    """Raise if the band counts of the given rasters differ"""
    counts = {r.bands for r in rasters}
    if len(counts) > 1:
        raise ValueError(f"Band count mismatch: {sorted(counts)}")


def check_light(img: Raster, light: AtmosphericLight) -> None:
    if light.bands != img.bands:
        raise ValueError(
            f"Atmospheric light has {light.bands} bands but the raster has {img.bands}"
        )


def brightness(img: Raster) -> ScalarField:
    """Per-pixel maximum over bands (HSV value)"""
    return ScalarField(img.data.max(axis=2))


def saturation(img: Raster) -> ScalarField:
    """Per-pixel (max - min) / max over bands, 0 where max is below the dark guard"""
    high = img.data.max(axis=2)
    low = img.data.min(axis=2)
    safe = np.where(high < SATURATION_GUARD, 1.0, high)
    sat = np.where(high < SATURATION_GUARD, 0.0, (high - low) / safe)
    return ScalarField(np.clip(sat, 0.0, 1.0))


def percentile(field: Union[ScalarField, np.ndarray], p: float) -> float:
    """Nearest-rank order statistic with lower interpolation

    Args:
        field: Field or array of samples
        p: Fraction in [0, 1]; 0 gives the minimum and 1 the maximum

    Returns:
        The sample at rank floor(p * (N - 1)) of the sorted data
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Percentile fraction must be in [0, 1], got {p}")
    data = field.data if isinstance(field, ScalarField) else np.asarray(field, dtype=np.float64)
    if data.size == 0:
        raise ValueError("Cannot take a percentile of an empty field")
    return float(np.quantile(data.ravel(), p, method="lower"))
