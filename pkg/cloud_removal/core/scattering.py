"""Forward imaging model and the synthetic scene generator

Generated scenes serve as ground truth for every round-trip and recovery check.
Randomness comes from numpy's PCG64 generator (``np.random.default_rng(seed)``),
so a seed reproduces a scene bit for bit on any platform with the same numpy
and OpenCV builds.
"""

import logging
from dataclasses import dataclass

import cv2
import numpy as np

from cloud_removal.core.raster import (
    AtmosphericLight,
    Raster,
    ScalarField,
    check_light,
    check_same_shape,
)
from cloud_removal.schemas.config_schemas import SynthConfig

logger = logging.getLogger(__name__)

CORE_T = 0.02
THIN_LOW_T = 0.3
CLEAR_LOW_T = 0.9
SURFACE_SCALES = (6.0, 12.0, 24.0)
SURFACE_WEIGHTS = (0.3, 0.5, 0.8)
SURFACE_STD = 0.07
HF_TEXTURE_STD = 0.02


@dataclass(frozen=True, eq=False)
class SceneTruth:
    """A synthetic scene with every plane needed to score a restoration"""

    surface: Raster
    transmission: ScalarField
    light: AtmosphericLight
    cloudy: Raster
    prior: Raster
    reference: Raster


def forward_degrade(surface: Raster, t: ScalarField, light: AtmosphericLight) -> Raster:
    """I = J * t + A * (1 - t), per band"""
    check_same_shape(surface, t)
    check_light(surface, light)
    if np.any(t.data < 0.0) or np.any(t.data > 1.0):
        raise ValueError("Transmission must lie in [0, 1]")
    tt = t.data[:, :, np.newaxis]
    return Raster(surface.data * tt + light.values * (1.0 - tt))


def _smooth_noise(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    noise = rng.standard_normal((size, size))
    blurred = cv2.GaussianBlur(noise, (0, 0), sigmaX=sigma, borderType=cv2.BORDER_REFLECT)
    return (blurred - blurred.mean()) / (blurred.std() + 1e-12)


def _layered_field(rng: np.random.Generator, size: int) -> np.ndarray:
    field = sum(w * _smooth_noise(rng, size, s) for s, w in zip(SURFACE_SCALES, SURFACE_WEIGHTS))
    return (field - field.mean()) / field.std()


def _procedural_surface(rng: np.random.Generator, size: int, bands: int) -> np.ndarray:
    # Shared structure plus a band-specific part keeps bands correlated
    shared = _layered_field(rng, size)
    means = np.linspace(0.15, 0.35, bands) if bands > 1 else np.array([0.25])
    planes = []
    for c in range(bands):
        own = _layered_field(rng, size)
        planes.append(means[c] + SURFACE_STD * (0.8 * shared + 0.6 * own))
    return np.clip(np.stack(planes, axis=2), 0.02, 0.75)


def _cloud_density(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    density = np.zeros((size, size))
    for _ in range(int(rng.integers(4, 9))):
        cy, cx = rng.uniform(0, size, 2)
        sigma = rng.uniform(0.06, 0.18) * size
        amp = rng.uniform(0.5, 1.0)
        density += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    # Faint smooth noise breaks rank ties far from the blobs
    density += 0.02 * _smooth_noise(rng, size, size / 16.0)
    return density


def density_to_transmission(density: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    """Map a cloud density field to t by rank, honouring the configured fractions

    Pixels sorted by increasing density fill, in order, clear sky (1 -> 0.9),
    thin cloud (0.9 -> 0.3), the transition band (0.3 -> 0.02) and thick cores
    (0.02 -> 0). Within a segment t follows the local rank, so t is a monotone
    function of a smooth density and stays spatially continuous.
    """
    n = density.size
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(density.ravel(), kind="stable")] = np.arange(n)

    f_core = cfg.thick_core_fraction
    f_trans = cfg.transition_fraction
    f_thin = cfg.thin_fraction
    f_clear = 1.0 - f_core - f_trans - f_thin
    # (fraction, t at segment start, t at segment end, shape exponent)
    segments = [
        (f_clear, 1.0, CLEAR_LOW_T, 2.0),
        (f_thin, CLEAR_LOW_T, THIN_LOW_T, 1.0),
        (f_trans, THIN_LOW_T, CORE_T, 1.0),
        (f_core, CORE_T, 0.0, 0.5),
    ]

    t = np.ones(n)
    start = 0
    cumulative = 0.0
    for index, (fraction, t_start, t_end, power) in enumerate(segments):
        cumulative += fraction
        stop = n if index == len(segments) - 1 else int(round(cumulative * n))
        stop = max(start, min(stop, n))
        if stop > start:
            sel = (ranks >= start) & (ranks < stop)
            local = (ranks[sel] - start) / (stop - start)
            t[sel] = t_start + (t_end - t_start) * local**power
        start = stop

    t = cfg.transmission_floor + (1.0 - cfg.transmission_floor) * t
    return np.clip(t.reshape(density.shape), 0.0, 1.0)


def _hallucinated_prior(
    rng: np.random.Generator, surface: np.ndarray, t: np.ndarray, cfg: SynthConfig
) -> np.ndarray:
    size, bands = surface.shape[0], surface.shape[2]
    # Artifacts concentrate where the observation carries little surface signal
    mask = np.clip((THIN_LOW_T - t) / THIN_LOW_T, 0.0, 1.0)[:, :, np.newaxis]

    cast = np.stack([_smooth_noise(rng, size, size / 8.0) for _ in range(bands)], axis=2)
    cast = cfg.hallucination_amplitude * cast / np.abs(cast).max(axis=(0, 1))

    texture = rng.standard_normal((size, size))
    texture = cfg.hallucination_hf_gain * HF_TEXTURE_STD * texture[:, :, np.newaxis]

    return np.clip(surface + mask * (cast + texture), 0.0, 1.0)


def generate_scene(cfg: SynthConfig) -> SceneTruth:
    """Build a deterministic synthetic scene for the given configuration

    Args:
        cfg: Generator settings; the seed fixes every random draw

    Returns:
        SceneTruth with surface, transmission, airlight, cloudy observation,
        hallucinated prior and affine-shifted temporal reference
    """
    rng = np.random.default_rng(cfg.seed)
    size = cfg.size

    surface = Raster(_procedural_surface(rng, size, cfg.bands))
    transmission = ScalarField(density_to_transmission(_cloud_density(rng, size), cfg))
    light = AtmosphericLight(np.asarray(cfg.airlight_vector()))
    cloudy = forward_degrade(surface, transmission, light)
    prior = Raster(_hallucinated_prior(rng, surface.data, transmission.data, cfg))
    reference = Raster(np.clip(cfg.ref_gain * surface.data + cfg.ref_offset, 0.0, 1.0))

    logger.debug(
        f"Generated scene seed={cfg.seed} size={size} "
        f"t range=[{transmission.data.min():.4f}, {transmission.data.max():.4f}]"
    )
    return SceneTruth(
        surface=surface,
        transmission=transmission,
        light=light,
        cloudy=cloudy,
        prior=prior,
        reference=reference,
    )
