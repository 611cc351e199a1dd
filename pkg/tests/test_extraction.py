import math

import numpy as np
import pytest
from conftest import cached_scene, constant_raster

from cloud_removal.core.extraction import (
    cloud_probability,
    confidence_normalizers,
    estimate_atmospheric_light,
    estimate_transmission,
    extract,
    hallucination_confidence,
    physical_residual,
    refine_transmission,
)
from cloud_removal.core.filters import base_layer, highfreq_intensity
from cloud_removal.core.raster import AtmosphericLight, Raster, ScalarField, brightness
from cloud_removal.schemas.config_schemas import ExtractionConfig, FilterParams


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def test_cloud_probability_is_bounded(rng):
    prob = cloud_probability(Raster(rng.uniform(0, 1, (32, 32, 3))), ExtractionConfig()).data
    assert np.all(prob > 0.0)
    assert np.all(prob < 1.0)


def test_cloud_probability_of_flat_white_and_dark_colour():
    cfg = ExtractionConfig()
    white = cloud_probability(constant_raster(1.0), cfg).data
    expected = _sigmoid(12 * 0.35) * _sigmoid(12 * 0.25) * _sigmoid(60 * 0.05)
    np.testing.assert_allclose(white, expected, rtol=1e-12)

    dark = Raster(np.broadcast_to([0.1, 0.3, 0.05], (32, 32, 3)))
    assert cloud_probability(dark, cfg).data.max() < 0.01


def test_airlight_from_thick_cores(scene):
    cfg = ExtractionConfig()
    prob = cloud_probability(scene.cloudy, cfg)
    estimate = estimate_atmospheric_light(scene.cloudy, prob, cfg)
    assert not estimate.used_fallback
    assert estimate.omega_mask.any()
    np.testing.assert_allclose(estimate.light.values, scene.light.values, atol=0.02)


def test_airlight_falls_back_to_brightest_pixels(caplog):
    cloudy = constant_raster(0.5)
    prob = ScalarField(np.full((32, 32), 0.3))
    estimate = estimate_atmospheric_light(cloudy, prob, ExtractionConfig())
    assert estimate.used_fallback
    assert int(estimate.omega_mask.sum()) == 1
    np.testing.assert_allclose(estimate.light.values, 0.5)
    assert "brightest" in caplog.text


def test_transmission_recovered_from_true_surface(scene):
    t_hat = estimate_transmission(scene.cloudy, scene.surface, scene.light, ExtractionConfig())
    distance = np.linalg.norm(scene.surface.data - scene.light.values, axis=2)
    valid = distance >= 0.05
    error = np.abs(t_hat.data - scene.transmission.data)[valid]
    assert error.max() <= 1e-3


def test_transmission_is_clamped():
    cloudy = constant_raster(0.2)
    prior = constant_raster(0.6)
    cfg = ExtractionConfig(t_clamp=(0.05, 0.95))
    # I - A lies beyond J - A, so the raw projection exceeds 1
    t = estimate_transmission(cloudy, prior, AtmosphericLight([0.9] * 3), cfg)
    np.testing.assert_allclose(t.data, 0.95)


def test_residual_vanishes_for_model_consistent_inputs(scene):
    r = physical_residual(scene.cloudy, scene.surface, scene.transmission, scene.light)
    np.testing.assert_allclose(r.data, 0.0, atol=1e-12)


def test_confidence_is_one_without_residual_or_excess_texture(scene):
    h = highfreq_intensity(scene.cloudy)
    r = ScalarField(np.zeros(h.shape))
    u = hallucination_confidence(r, h, h, ExtractionConfig())
    np.testing.assert_array_equal(u.data, 1.0)
    assert confidence_normalizers(r, h, h, ExtractionConfig()) == (1e-4, 1e-4)


def test_confidence_penalizes_residual_and_texture(rng):
    r = ScalarField(rng.uniform(0, 0.1, (32, 32)))
    h_prior = ScalarField(rng.uniform(0, 0.5, (32, 32)))
    h_cloudy = ScalarField(np.zeros((32, 32)))
    cfg = ExtractionConfig()
    u = hallucination_confidence(r, h_prior, h_cloudy, cfg).data
    lambda_phy, lambda_hall = confidence_normalizers(r, h_prior, h_cloudy, cfg)
    expected = np.exp(-r.data / lambda_phy) * np.exp(-h_prior.data / lambda_hall)
    np.testing.assert_allclose(u, expected, rtol=1e-12)
    assert np.all(u > 0.0) and np.all(u <= 1.0)


def test_confidence_stays_positive_under_underflow():
    r = ScalarField(np.array([[0.0, 0.0, 0.0, 50.0]]))
    h = ScalarField(np.zeros((1, 4)))
    u = hallucination_confidence(r, h, h, ExtractionConfig()).data
    assert u[0, 3] > 0.0


def test_refined_transmission_respects_clamp(rng):
    t = ScalarField(rng.uniform(0, 1, (32, 32)))
    guide = ScalarField(rng.uniform(0, 1, (32, 32)))
    u = ScalarField(rng.uniform(0, 1, (32, 32)))
    refined = refine_transmission(t, guide, u, FilterParams(refine_radius=3), (0.1, 0.9)).data
    assert refined.min() >= 0.1 and refined.max() <= 0.9


def test_extract_produces_consistent_fields(scene):
    estimate = extract(scene.cloudy, scene.prior, FilterParams(), ExtractionConfig())
    for name in ("transmission", "confidence", "residual", "probability", "raw_transmission"):
        assert getattr(estimate, name).shape == scene.cloudy.shape
    t = estimate.transmission.data
    u = estimate.confidence.data
    assert t.min() >= 0.0 and t.max() <= 1.0
    assert np.all(u > 0.0) and np.all(u <= 1.0)
    assert estimate.lambda_phy >= 1e-4 and estimate.lambda_hall >= 1e-4


def test_extract_distrusts_hallucinated_cores(scene):
    estimate = extract(scene.cloudy, scene.prior, FilterParams(), ExtractionConfig())
    t_true = scene.transmission.data
    u = estimate.confidence.data
    assert u[t_true < 0.02].mean() < u[t_true > 0.9].mean()


def test_extract_rejects_mismatched_inputs(scene):
    with pytest.raises(ValueError):
        extract(scene.cloudy, cached_scene(0, size=64).prior, FilterParams(), ExtractionConfig())


def test_refinement_repairs_distrusted_outliers(rng):
    xx = np.tile(np.arange(64, dtype=np.float64), (64, 1))
    clean = 0.3 + 0.4 * xx / 63.0
    noisy_mask = rng.uniform(0, 1, clean.shape) < 0.05
    noisy = np.where(noisy_mask, rng.choice([0.0, 1.0], clean.shape), clean)
    confidence = ScalarField(np.where(noisy_mask, 0.0, 1.0))
    params = FilterParams(refine_radius=3, refine_eps=1e-6)

    refined = refine_transmission(ScalarField(noisy), ScalarField(clean), confidence, params).data
    before = np.abs(noisy - clean).max()
    after = np.abs(refined - clean).max()
    assert after * 5.0 <= before


def test_extract_with_an_unchanged_candidate(scene):
    estimate = extract(scene.cloudy, scene.cloudy, FilterParams(), ExtractionConfig())
    clear = scene.transmission.data > 0.9
    base = base_layer(scene.cloudy, FilterParams(), guide=brightness(scene.cloudy)).data
    distinct = np.linalg.norm(base - estimate.light.values, axis=2) >= 0.05
    assert estimate.raw_transmission.data[clear & distinct].min() >= 0.999
    assert np.median(estimate.transmission.data[clear]) >= 0.99
    assert estimate.residual.data.max() <= 1e-3
