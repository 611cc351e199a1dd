"""Restoration stages: inversion, cognitive adjustment, alignment and fusion"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from cloud_removal.core.filters import lowpass
from cloud_removal.core.raster import (
    AtmosphericLight,
    Raster,
    ScalarField,
    check_light,
    check_same_bands,
    check_same_shape,
)
from cloud_removal.schemas.config_schemas import FilterParams, RestoreConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceAlignment:
    """Per-band affine map applied to the temporal reference"""

    gains: Tuple[float, ...]
    offsets: Tuple[float, ...]
    n_pixels: int
    used_fallback: bool = False
    threshold: float = field(default=0.9, compare=False)

    @classmethod
    def identity(
        cls, bands: int, n_pixels: int = 0, threshold: float = 0.9
    ) -> "ReferenceAlignment":
        return cls(
            gains=(1.0,) * bands,
            offsets=(0.0,) * bands,
            n_pixels=n_pixels,
            used_fallback=True,
            threshold=threshold,
        )

    def pairs(self) -> List[Tuple[float, float]]:
        """(gain, offset) per band"""
        return list(zip(self.gains, self.offsets))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gains": list(self.gains),
            "offsets": list(self.offsets),
            "n_pixels": self.n_pixels,
            "used_fallback": self.used_fallback,
            "omega_threshold": self.threshold,
        }


def _broadcast(field_: ScalarField) -> np.ndarray:
    return field_.data[:, :, np.newaxis]


def invert_scattering(
    cloudy: Raster, t: ScalarField, light: AtmosphericLight, cfg: RestoreConfig
) -> Raster:
    """J_phy = (I - A) / max(t, t0) + A, clamped to [0, 1]"""
    check_same_shape(cloudy, t)
    check_light(cloudy, light)
    denom = np.maximum(t.data, cfg.t0)[:, :, np.newaxis]
    j_phy = (cloudy.data - light.values) / denom + light.values
    return Raster(np.clip(j_phy, 0.0, 1.0))


def cognitive_adjust(
    j_phy: Raster,
    prior: Raster,
    cloudy: Raster,
    t: ScalarField,
    confidence: ScalarField,
    fcfg: FilterParams,
    cfg: RestoreConfig,
) -> Raster:
    """Frequency-decoupled correction of the physical estimate

    Low frequencies of the VLM candidate are pulled in where it is trusted,
    high frequencies of the observation are re-injected where the surface is
    visible:

        J_cog = J_phy + alpha * U * (lp(J_VLM) - lp(J_phy)) + beta * t * (I - lp(I))

    Args:
        j_phy: Physically inverted image
        prior: VLM candidate
        cloudy: Observed image
        t: Refined transmission
        confidence: Hallucination confidence U
        fcfg: Filter settings (low-pass sigma)
        cfg: Restoration gains alpha and beta

    Returns:
        Adjusted image clamped to [0, 1]
    """
    check_same_shape(j_phy, prior, cloudy, t, confidence)
    check_same_bands(j_phy, prior, cloudy)

    sigma = fcfg.lp_sigma
    cognitive = _broadcast(confidence) * (lowpass(prior, sigma).data - lowpass(j_phy, sigma).data)
    detail = _broadcast(t) * (cloudy.data - lowpass(cloudy, sigma).data)
    j_cog = j_phy.data + cfg.alpha * cognitive + cfg.beta * detail
    return Raster(np.clip(j_cog, 0.0, 1.0))


def visibility_weight(t: ScalarField, cfg: RestoreConfig) -> ScalarField:
    """omega = exp(-gamma * (1 - t)), in [exp(-gamma), 1]"""
    if np.any(t.data < 0.0) or np.any(t.data > 1.0):
        raise ValueError("Transmission must lie in [0, 1]")
    return ScalarField(np.exp(-cfg.gamma * (1.0 - t.data)))


def align_reference(
    reference: Raster, j_cog: Raster, omega: ScalarField, cfg: RestoreConfig
) -> Tuple[Raster, ReferenceAlignment]:
    """Fit the reference to the current scene on high-visibility pixels

    Per band, gain a and offset b minimize sum((a * ref + b - j_cog)^2) over
    the pixels where omega exceeds cfg.align_omega_threshold. With fewer than
    cfg.align_min_pixels such pixels the identity map is used and flagged.

    Args:
        reference: Clear-sky temporal reference
        j_cog: Cognitively adjusted image of the current date
        omega: Visibility weight
        cfg: Alignment threshold and minimum pixel count

    Returns:
        Aligned reference clamped to [0, 1] and the fitted parameters
    """
    check_same_shape(reference, j_cog, omega)
    check_same_bands(reference, j_cog)

    selected = omega.data > cfg.align_omega_threshold
    n_pixels = int(np.count_nonzero(selected))

    if n_pixels < cfg.align_min_pixels:
        logger.warning(
            f"Only {n_pixels} pixels exceed omega={cfg.align_omega_threshold} "
            f"(need {cfg.align_min_pixels}); using identity alignment"
        )
        alignment = ReferenceAlignment.identity(
            reference.bands, n_pixels=n_pixels, threshold=cfg.align_omega_threshold
        )
        return Raster(reference.data), alignment

    gains, offsets = [], []
    ones = np.ones(n_pixels)
    for c in range(reference.bands):
        x = reference.data[:, :, c][selected]
        y = j_cog.data[:, :, c][selected]
        design = np.column_stack([x, ones])
        (gain, offset), *_ = np.linalg.lstsq(design, y, rcond=None)
        gains.append(float(gain))
        offsets.append(float(offset))

    alignment = ReferenceAlignment(
        gains=tuple(gains),
        offsets=tuple(offsets),
        n_pixels=n_pixels,
        threshold=cfg.align_omega_threshold,
    )
    logger.debug(f"Reference alignment over {n_pixels} pixels: {alignment.pairs()}")

    aligned = reference.data * np.asarray(gains) + np.asarray(offsets)
    return Raster(np.clip(aligned, 0.0, 1.0)), alignment


def fuse(j_cog: Raster, ref_aligned: Raster, omega: ScalarField) -> Raster:
    """J = omega * J_cog + (1 - omega) * ref_aligned"""
    check_same_shape(j_cog, ref_aligned, omega)
    check_same_bands(j_cog, ref_aligned)
    if np.any(omega.data < 0.0) or np.any(omega.data > 1.0):
        raise ValueError("Visibility weight must lie in [0, 1]")
    w = _broadcast(omega)
    return Raster(np.clip(w * j_cog.data + (1.0 - w) * ref_aligned.data, 0.0, 1.0))


def hard_mask_composite(
    scene: Raster, ref_aligned: Raster, t: ScalarField, threshold: float = 0.02
) -> Raster:
    """Segmentation-style baseline: reference where t < threshold, scene elsewhere"""
    check_same_shape(scene, ref_aligned, t)
    check_same_bands(scene, ref_aligned)
    mask = (t.data < threshold)[:, :, np.newaxis]
    return Raster(np.where(mask, ref_aligned.data, scene.data))
