"""Physics-guided parameter extraction

Fits the scattering model to the cloudy observation under the guidance of the
VLM candidate: airlight A from the cloudiest region, a per-pixel transmission
from base layers, and a confidence map that penalizes physically inconsistent
or spuriously textured parts of the candidate.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit

from cloud_removal.core.filters import (
    base_layer,
    gradient_magnitude,
    highfreq_intensity,
    weighted_guided_filter,
)
from cloud_removal.core.raster import (
    AtmosphericLight,
    Raster,
    ScalarField,
    brightness,
    check_light,
    check_same_bands,
    check_same_shape,
    percentile,
    saturation,
)
from cloud_removal.schemas.config_schemas import ExtractionConfig, FilterParams, SigmoidGate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AirlightEstimate:
    """Airlight together with the region it was regressed from"""

    light: AtmosphericLight
    omega_mask: np.ndarray
    used_fallback: bool = False


@dataclass(frozen=True, eq=False)
class ScatterEstimate:
    """Physical parameters extracted from a cloudy image and its VLM candidate"""

    light: AtmosphericLight
    transmission: ScalarField
    confidence: ScalarField
    omega_mask: np.ndarray
    residual: ScalarField
    probability: ScalarField
    raw_transmission: ScalarField
    lambda_phy: float
    lambda_hall: float
    airlight_fallback: bool = False


def _gate(values: np.ndarray, gate: SigmoidGate) -> np.ndarray:
    return expit(gate.slope * (values - gate.center))


def cloud_probability(cloudy: Raster, cfg: ExtractionConfig) -> ScalarField:
    """Bright, achromatic and flat pixels score close to 1"""
    v = brightness(cloudy)
    s = saturation(cloudy).data
    grad = gradient_magnitude(v).data
    prob = _gate(v.data, cfg.gate_v) * _gate(1.0 - s, cfg.gate_s) * _gate(-grad, cfg.gate_g)
    return ScalarField(prob)


def estimate_atmospheric_light(
    cloudy: Raster, prob: ScalarField, cfg: ExtractionConfig
) -> AirlightEstimate:
    """Per-band median of the cloudy image over the most cloud-like region

    The region holds every pixel whose probability exceeds the kappa percentile
    of the map. When it is empty the brightest fallback_fraction of pixels is
    used instead and the estimate is flagged.

    Args:
        cloudy: Observed image
        prob: Cloud probability map
        cfg: Extraction settings

    Returns:
        AirlightEstimate with the light vector and the region mask
    """
    check_same_shape(cloudy, prob)
    kappa = percentile(prob, cfg.kappa_percentile)
    mask = prob.data > kappa
    used_fallback = False

    if not np.any(mask):
        n_pixels = prob.data.size
        k = max(1, int(round(cfg.fallback_fraction * n_pixels)))
        logger.warning(
            f"Cloud region is empty (constant probability map); "
            f"using the {k} brightest pixels for the airlight"
        )
        order = np.argsort(brightness(cloudy).data.ravel(), kind="stable")
        mask = np.zeros(n_pixels, dtype=bool)
        mask[order[-k:]] = True
        mask = mask.reshape(prob.shape)
        used_fallback = True

    values = np.median(cloudy.data[mask], axis=0)
    light = AtmosphericLight(np.clip(values, 0.0, 1.0))
    logger.debug(f"Airlight {light.tolist()} from {int(mask.sum())} pixels (kappa={kappa:.4f})")
    return AirlightEstimate(light=light, omega_mask=mask, used_fallback=used_fallback)


def estimate_transmission(
    cloudy_base: Raster, prior_base: Raster, light: AtmosphericLight, cfg: ExtractionConfig
) -> ScalarField:
    """t = <I_B - A, J_B - A> / (|J_B - A|^2 + eps), clamped"""
    check_same_shape(cloudy_base, prior_base)
    check_same_bands(cloudy_base, prior_base)
    check_light(cloudy_base, light)
    d_obs = cloudy_base.data - light.values
    d_prior = prior_base.data - light.values
    num = np.sum(d_obs * d_prior, axis=2)
    den = np.sum(d_prior * d_prior, axis=2) + cfg.eps_t
    low, high = cfg.t_clamp
    return ScalarField(np.clip(num / den, low, high))


def physical_residual(
    cloudy_base: Raster, prior_base: Raster, t: ScalarField, light: AtmosphericLight
) -> ScalarField:
    """r = |I_B - (t * J_B + (1 - t) * A)| across bands"""
    check_same_shape(cloudy_base, prior_base, t)
    check_light(cloudy_base, light)
    tt = t.data[:, :, np.newaxis]
    synth = tt * prior_base.data + (1.0 - tt) * light.values
    return ScalarField(np.linalg.norm(cloudy_base.data - synth, axis=2))


def confidence_normalizers(
    r: ScalarField, h_prior: ScalarField, h_cloudy: ScalarField, cfg: ExtractionConfig
) -> Tuple[float, float]:
    """Adaptive lambda_phy and lambda_hall, floored"""
    excess = np.maximum(0.0, h_prior.data - h_cloudy.data)
    lambda_phy = max(percentile(r, cfg.lambda_percentile), cfg.lambda_floor)
    lambda_hall = max(percentile(excess, cfg.lambda_percentile), cfg.lambda_floor)
    return lambda_phy, lambda_hall


def hallucination_confidence(
    r: ScalarField, h_prior: ScalarField, h_cloudy: ScalarField, cfg: ExtractionConfig
) -> ScalarField:
    """U = exp(-r / lambda_phy) * exp(-max(0, H_prior - H_cloudy) / lambda_hall)"""
    check_same_shape(r, h_prior, h_cloudy)
    lambda_phy, lambda_hall = confidence_normalizers(r, h_prior, h_cloudy, cfg)
    excess = np.maximum(0.0, h_prior.data - h_cloudy.data)
    u = np.exp(-r.data / lambda_phy) * np.exp(-excess / lambda_hall)
    # Keep U strictly positive where the exponentials underflow
    return ScalarField(np.maximum(u, np.finfo(np.float64).tiny))


def refine_transmission(
    t: ScalarField,
    guide: ScalarField,
    confidence: ScalarField,
    params: FilterParams,
    t_clamp: Tuple[float, float] = (0.0, 1.0),
) -> ScalarField:
    """Confidence-weighted guided refinement of t, re-clamped"""
    refined = weighted_guided_filter(
        t,
        guide,
        confidence,
        params.refine_radius,
        params.refine_eps,
        weight_floor=params.weight_floor,
    )
    low, high = t_clamp
    return ScalarField(np.clip(refined.data, low, high))


def extract(
    cloudy: Raster, prior: Raster, fcfg: FilterParams, ecfg: ExtractionConfig
) -> ScatterEstimate:
    """Full parameter extraction: A, t and U with every intermediate

    Args:
        cloudy: Observed image I
        prior: VLM candidate J_VLM, same dimensions and bands
        fcfg: Filter settings
        ecfg: Extraction settings

    Returns:
        ScatterEstimate holding the refined transmission, confidence and intermediates
    """
    check_same_shape(cloudy, prior)
    check_same_bands(cloudy, prior)

    guide = brightness(cloudy)
    cloudy_base = base_layer(cloudy, fcfg, guide=guide)
    prior_base = base_layer(prior, fcfg, guide=guide)

    prob = cloud_probability(cloudy, ecfg)
    airlight = estimate_atmospheric_light(cloudy, prob, ecfg)

    raw_t = estimate_transmission(cloudy_base, prior_base, airlight.light, ecfg)
    residual = physical_residual(cloudy_base, prior_base, raw_t, airlight.light)

    h_prior = highfreq_intensity(prior)
    h_cloudy = highfreq_intensity(cloudy)
    lambda_phy, lambda_hall = confidence_normalizers(residual, h_prior, h_cloudy, ecfg)
    confidence = hallucination_confidence(residual, h_prior, h_cloudy, ecfg)

    t = refine_transmission(raw_t, guide, confidence, fcfg, ecfg.t_clamp)

    logger.info(
        f"Extracted parameters: A={[round(a, 4) for a in airlight.light.tolist()]}, "
        f"mean t={t.data.mean():.4f}, mean U={confidence.data.mean():.4f}"
    )
    logger.debug(f"lambda_phy={lambda_phy:.6g}, lambda_hall={lambda_hall:.6g}")

    return ScatterEstimate(
        light=airlight.light,
        transmission=t,
        confidence=confidence,
        omega_mask=airlight.omega_mask,
        residual=residual,
        probability=prob,
        raw_transmission=raw_t,
        lambda_phy=lambda_phy,
        lambda_hall=lambda_hall,
        airlight_fallback=airlight.used_fallback,
    )
