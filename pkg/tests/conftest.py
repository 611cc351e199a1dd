from functools import lru_cache

import numpy as np
import pytest

from cloud_removal.core.raster import Raster, ScalarField
from cloud_removal.core.scattering import SceneTruth, generate_scene
from cloud_removal.schemas.config_schemas import SynthConfig

SEEDS = list(range(10))


@lru_cache(maxsize=32)
def cached_scene(seed: int, size: int = 128, **overrides) -> SceneTruth:
    return generate_scene(SynthConfig(seed=seed, size=size, **overrides))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def scene() -> SceneTruth:
    return cached_scene(0)


@pytest.fixture
def small_scene() -> SceneTruth:
    return cached_scene(3, size=64)


def constant_raster(value: float, shape=(32, 32), bands: int = 3) -> Raster:
    return Raster(np.full((*shape, bands), value))


def constant_field(value: float, shape=(32, 32)) -> ScalarField:
    return ScalarField(np.full(shape, value))
