"""Tunable parameters of every stage

Defaults are engineering choices wherever the method leaves a constant open;
each one is exposed so that a run's config.json documents it.
"""

from pathlib import Path
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cloud_removal.utils.constants import (
    AIRLIGHT_FALLBACK_FRACTION,
    DEFAULT_PROMPT,
    DEFAULT_TOKEN_ENV,
    WEIGHT_FLOOR,
    BaseGuide,
    NanPolicy,
    PriorMode,
)


class _Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class FilterParams(_Config):
    """Base-layer, low-pass and refinement filter settings"""

    base_radius: int = Field(8, ge=1)
    base_eps: float = Field(1e-3, gt=0)
    lp_sigma: float = Field(4.0, gt=0)
    refine_radius: int = Field(8, ge=1)
    refine_eps: float = Field(1e-3, gt=0)
    weight_floor: float = Field(WEIGHT_FLOOR, gt=0)
    base_guide: BaseGuide = BaseGuide.SELF


class SigmoidGate(_Config):
    """sigma(z) = 1 / (1 + exp(-slope * (z - center)))"""

    center: float
    slope: float = Field(gt=0)


class ExtractionConfig(_Config):
    """Airlight, transmission and confidence estimation settings"""

    kappa_percentile: float = Field(0.85, gt=0, lt=1)
    gate_v: SigmoidGate = SigmoidGate(center=0.65, slope=12.0)
    gate_s: SigmoidGate = SigmoidGate(center=0.75, slope=12.0)
    gate_g: SigmoidGate = SigmoidGate(center=-0.05, slope=60.0)
    eps_t: float = Field(1e-6, gt=0)
    lambda_percentile: float = Field(0.75, gt=0, lt=1)
    lambda_floor: float = Field(1e-4, gt=0)
    t_clamp: Tuple[float, float] = (0.0, 1.0)
    fallback_fraction: float = Field(AIRLIGHT_FALLBACK_FRACTION, gt=0, le=1)

    @field_validator("t_clamp")
    @classmethod
    def _check_clamp(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 <= low < high <= 1.0:
            raise ValueError(f"t_clamp must satisfy 0 <= low < high <= 1, got {value}")
        return value


class RestoreConfig(_Config):
    """Inversion, cognitive adjustment, alignment and fusion settings"""

    t0: float = Field(0.1, gt=0, lt=1)
    alpha: float = Field(0.6, ge=0)
    beta: float = Field(1.0, ge=0)
    gamma: float = Field(4.0, gt=0)
    align_omega_threshold: float = Field(0.9, gt=0, lt=1)
    align_min_pixels: int = Field(500, ge=2)
    skip_fusion: bool = False


class PipelineConfig(_Config):
    """Every tunable of a restoration run"""

    filter: FilterParams = FilterParams()
    extraction: ExtractionConfig = ExtractionConfig()
    restore: RestoreConfig = RestoreConfig()


class SynthConfig(_Config):
    """Synthetic scene generator settings

    Fractions partition the pixels by rank of a smooth cloud-density field:
    thick cores (t < 0.02), a transition band (0.02..0.3), thin cloud (0.3..0.9)
    and clear sky (0.9..1). With a non-zero transmission_floor, t is remapped to
    floor + (1 - floor) * t after the partition.
    """

    seed: int = Field(0, ge=0)
    size: int = Field(256, ge=32)
    bands: int = Field(3, ge=1)
    airlight: Tuple[float, ...] = (0.9,)
    thick_core_fraction: float = Field(0.1, ge=0, le=1)
    transition_fraction: float = Field(0.1, ge=0, le=1)
    thin_fraction: float = Field(0.35, ge=0, le=1)
    transmission_floor: float = Field(0.0, ge=0, lt=1)
    hallucination_amplitude: float = Field(0.2, ge=0)
    hallucination_hf_gain: float = Field(2.5, ge=0)
    ref_gain: float = Field(1.1, gt=0)
    ref_offset: float = -0.02

    @model_validator(mode="after")
    def _check_partition(self) -> "SynthConfig":
        total = self.thick_core_fraction + self.transition_fraction + self.thin_fraction
        if total > 1.0 + 1e-12:
            raise ValueError(f"Cloud fractions must sum to at most 1, got {total:.4f}")
        if len(self.airlight) not in (1, self.bands):
            raise ValueError(
                f"airlight must have 1 or {self.bands} values, got {len(self.airlight)}"
            )
        if any(not 0.0 <= a <= 1.0 for a in self.airlight):
            raise ValueError(f"airlight values must lie in [0, 1], got {self.airlight}")
        return self

    def airlight_vector(self) -> Tuple[float, ...]:
        if len(self.airlight) == 1:
            return self.airlight * self.bands
        return self.airlight


class PriorSpec(_Config):
    """Acquisition channel for the VLM candidate"""

    mode: PriorMode = PriorMode.FILE
    path: Optional[Path] = None
    endpoint: Optional[str] = None
    prompt: str = DEFAULT_PROMPT
    timeout: float = Field(120.0, gt=0)
    model: Optional[str] = None
    token_env: str = DEFAULT_TOKEN_ENV
    max_concurrent: int = Field(2, ge=1)
    scale: Optional[float] = Field(None, gt=0, description="Reflectance scale for integer files")
    nan_policy: NanPolicy = NanPolicy.CLAMP

    @model_validator(mode="after")
    def _check_channel(self) -> "PriorSpec":
        if self.mode == PriorMode.FILE and (self.path is None or self.endpoint is not None):
            raise ValueError("File mode requires a path and no endpoint")
        if self.mode == PriorMode.REMOTE and (self.endpoint is None or self.path is not None):
            raise ValueError("Remote mode requires an endpoint and no path")
        return self
