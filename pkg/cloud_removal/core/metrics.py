"""Full-reference quality metrics (PSNR, SSIM)"""

import logging
import math
from typing import List

import numpy as np
from skimage.metrics import mean_squared_error, structural_similarity

from cloud_removal.core.raster import Raster, brightness, check_same_bands, check_same_shape
from cloud_removal.schemas.report_schemas import QualityReport
from cloud_removal.utils.constants import PSNR_CAP_DB

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _psnr_from_mse(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def psnr(a: Raster, b: Raster) -> float:
    """10 * log10(1 / MSE) over every band and pixel, for data range 1

    Identical images report PSNR_CAP_DB.
    """
    check_same_shape(a, b)
    check_same_bands(a, b)
    return _psnr_from_mse(float(mean_squared_error(a.data, b.data)))


def per_band_psnr(a: Raster, b: Raster) -> List[float]:
    check_same_shape(a, b)
    check_same_bands(a, b)
    return [
        _psnr_from_mse(float(mean_squared_error(a.data[:, :, c], b.data[:, :, c])))
        for c in range(a.bands)
    ]


def ssim(a: Raster, b: Raster) -> float:
    """Single-scale SSIM on brightness

    11-tap Gaussian window with sigma 1.5, K1 = 0.01 and K2 = 0.03 for data
    range 1, averaged over the interior where the window fits.
    """
    check_same_shape(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape}"
        )
    value = structural_similarity(
        brightness(a).data,
        brightness(b).data,
        data_range=1.0,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
    )
    return float(np.clip(value, -1.0, 1.0))


def evaluate(result: Raster, truth: Raster) -> QualityReport:
    """Score a restoration against clear-sky truth

    Args:
        result: Restored image
        truth: Ground-truth surface of the same dimensions

    Returns:
        QualityReport with overall and per-band PSNR and SSIM
    """
    report = QualityReport(
        psnr=psnr(result, truth),
        ssim=ssim(result, truth),
        per_band_psnr=per_band_psnr(result, truth),
    )
    logger.debug(f"PSNR={report.psnr:.3f} dB, SSIM={report.ssim:.4f}")
    return report
