"""Edge-preserving and frequency-separating filters

All filters replicate edge pixels and preserve constants exactly.
"""

import logging
import math
from typing import Optional

import cv2
import numpy as np

from cloud_removal.core.raster import Raster, ScalarField, brightness, check_same_shape
from cloud_removal.schemas.config_schemas import FilterParams
from cloud_removal.utils.constants import WEIGHT_FLOOR, BaseGuide

logger = logging.getLogger(__name__)

# Sobel responds with 8 * slope on an affine ramp
SOBEL_GAIN = 8.0


def _writable(arr: np.ndarray) -> np.ndarray:
    # OpenCV wants contiguous, writable float64 buffers
    return np.require(arr, dtype=np.float64, requirements=["C_CONTIGUOUS", "WRITEABLE"])


def _box(arr: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return cv2.boxFilter(
        _writable(arr),
        cv2.CV_64F,
        (size, size),
        normalize=True,
        borderType=cv2.BORDER_REPLICATE,
    )


def _check_radius(radius: int) -> None:
    if radius < 1:
        raise ValueError(f"Filter radius must be at least 1, got {radius}")


def box_mean(field: ScalarField, radius: int) -> ScalarField:
    """Windowed mean over a (2r+1)×(2r+1) window with replicated edges"""
    _check_radius(radius)
    return ScalarField(_box(field.data, radius))


def _guided(p: np.ndarray, guide: np.ndarray, radius: int, eps: float) -> np.ndarray:
    mean_i = _box(guide, radius)
    mean_p = _box(p, radius)
    cov_ip = _box(guide * p, radius) - mean_i * mean_p
    var_i = _box(guide * guide, radius) - mean_i * mean_i

    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i

    return _box(a, radius) * guide + _box(b, radius)


def guided_filter(
    input: ScalarField, guide: ScalarField, radius: int, eps: float
) -> ScalarField:
    """Guided filter: local linear model q = a * guide + b

    Args:
        input: Field to filter
        guide: Guidance field, same dimensions as input
        radius: Window radius in pixels
        eps: Regularizer on a

    Returns:
        Filtered field
    """
    _check_radius(radius)
    check_same_shape(input, guide)
    return ScalarField(_guided(input.data, guide.data, radius, eps))


def weighted_guided_filter(
    input: ScalarField,
    guide: ScalarField,
    weights: ScalarField,
    radius: int,
    eps: float,
    weight_floor: float = WEIGHT_FLOOR,
) -> ScalarField:
    """Guided filter whose window statistics are weight-normalized

    Each pixel contributes to the window means, variance and covariance in
    proportion to its weight. Windows whose total weight falls below weight_floor
    use unweighted statistics. The per-window coefficients are box-averaged
    before application, as in the unweighted filter.

    Args:
        input: Field to filter
        guide: Guidance field
        weights: Per-pixel trust in [0, 1]
        radius: Window radius in pixels
        eps: Regularizer on a
        weight_floor: Minimum total window weight

    Returns:
        Filtered field
    """
    _check_radius(radius)
    check_same_shape(input, guide, weights)
    w = weights.data
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("Weights must lie in [0, 1]")
    p, g = input.data, guide.data
    window = (2 * radius + 1) ** 2

    mean_w = _box(w, radius)
    sparse = mean_w * window < weight_floor
    safe_w = np.where(sparse, 1.0, mean_w)

    mean_i = _box(w * g, radius) / safe_w
    mean_p = _box(w * p, radius) / safe_w
    corr_ip = _box(w * g * p, radius) / safe_w
    corr_ii = _box(w * g * g, radius) / safe_w

    if np.any(sparse):
        logger.debug(f"{int(np.count_nonzero(sparse))} windows fell back to unweighted statistics")
        mean_i = np.where(sparse, _box(g, radius), mean_i)
        mean_p = np.where(sparse, _box(p, radius), mean_p)
        corr_ip = np.where(sparse, _box(g * p, radius), corr_ip)
        corr_ii = np.where(sparse, _box(g * g, radius), corr_ii)

    cov_ip = corr_ip - mean_i * mean_p
    var_i = corr_ii - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i

    return ScalarField(_box(a, radius) * g + _box(b, radius))


def base_layer(
    img: Raster, params: FilterParams, guide: Optional[ScalarField] = None
) -> Raster:
    """Edge-preserving base layer, band by band

    With params.base_guide == SELF each band guides itself. With CLOUDY the
    supplied guide (brightness of the cloudy observation) is used for every band.
    """
    if params.base_guide == BaseGuide.CLOUDY:
        if guide is None:
            raise ValueError("Joint base-layer filtering requires a guide field")
        check_same_shape(img, guide)

    bands = []
    for c in range(img.bands):
        band = img.data[:, :, c]
        g = band if params.base_guide == BaseGuide.SELF else guide.data
        bands.append(_guided(band, g, params.base_radius, params.base_eps))
    return Raster(np.stack(bands, axis=2))


def gaussian_kernel_size(sigma: float) -> int:
    """Odd kernel size truncated at 3 sigma"""
    return 2 * int(math.ceil(3.0 * sigma)) + 1


def lowpass(img: Raster, sigma: float) -> Raster:
    """Per-band Gaussian blur, truncated at 3 sigma, normalized kernel"""
    if sigma <= 0:
        raise ValueError(f"Low-pass sigma must be positive, got {sigma}")
    size = gaussian_kernel_size(sigma)
    bands = [
        cv2.GaussianBlur(
            _writable(img.data[:, :, c]),
            (size, size),
            sigmaX=sigma,
            sigmaY=sigma,
            borderType=cv2.BORDER_REPLICATE,
        )
        for c in range(img.bands)
    ]
    return Raster(np.stack(bands, axis=2))


def highfreq_intensity(img: Raster) -> ScalarField:
    """|4-neighbour Laplacian| of the brightness channel"""
    v = brightness(img).data
    lap = cv2.Laplacian(_writable(v), cv2.CV_64F, ksize=1, borderType=cv2.BORDER_REPLICATE)
    return ScalarField(np.abs(lap))


def gradient_magnitude(field: ScalarField) -> ScalarField:
    """Sobel gradient magnitude, scaled so an affine ramp reports its slope"""
    f = _writable(field.data)
    scale = 1.0 / SOBEL_GAIN
    gx = cv2.Sobel(f, cv2.CV_64F, 1, 0, ksize=3, scale=scale, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(f, cv2.CV_64F, 0, 1, ksize=3, scale=scale, borderType=cv2.BORDER_REPLICATE)
    return ScalarField(np.hypot(gx, gy))
