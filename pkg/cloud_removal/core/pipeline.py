"""End-to-end restoration: extraction, inversion, adjustment, alignment, fusion"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Generator, Optional

import httpx

from cloud_removal.core import metrics
from cloud_removal.core.extraction import ScatterEstimate, extract
from cloud_removal.core.raster import Raster, ScalarField, check_same_bands, check_same_shape
from cloud_removal.core.restoration import (
    ReferenceAlignment,
    align_reference,
    cognitive_adjust,
    fuse,
    invert_scattering,
    visibility_weight,
)
from cloud_removal.priors import acquire_prior
from cloud_removal.schemas.config_schemas import (
    ExtractionConfig,
    FilterParams,
    PipelineConfig,
    PriorSpec,
    RestoreConfig,
)
from cloud_removal.schemas.report_schemas import QualityReport
from cloud_removal.utils.constants import PipelineStage, RunMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RestorationBundle:
    """Every intermediate of a restoration run"""

    j_phy: Raster
    j_cog: Raster
    omega: ScalarField
    final: Raster
    mode: RunMode
    estimate: ScatterEstimate
    ref_aligned: Optional[Raster] = None
    alignment: Optional[ReferenceAlignment] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def align_params(self) -> list[tuple[float, float]]:
        return self.alignment.pairs() if self.alignment else []


class _StageTimer:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: PipelineStage) -> Generator[None, None, None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name.value] = (time.perf_counter() - start) * 1000.0


def run_pipeline(
    cloudy: Raster,
    prior: Raster,
    reference: Optional[Raster],
    fcfg: FilterParams,
    ecfg: ExtractionConfig,
    rcfg: RestoreConfig,
) -> RestorationBundle:
    """Restore a cloudy image with a VLM candidate and an optional temporal reference

    Without a reference, or with rcfg.skip_fusion, alignment and fusion are
    skipped and the final image is J_cog; the bundle's mode records which path ran.

    Args:
        cloudy: Observed image I
        prior: VLM candidate J_VLM
        reference: Clear-sky temporal reference, or None
        fcfg: Filter settings
        ecfg: Extraction settings
        rcfg: Restoration settings

    Returns:
        RestorationBundle with the final image and every intermediate
    """
    rasters = [cloudy, prior] + ([reference] if reference is not None else [])
    check_same_shape(*rasters)
    check_same_bands(*rasters)

    timer = _StageTimer()
    logger.info(f"Restoring {cloudy.height}x{cloudy.width}x{cloudy.bands} image")

    with timer.stage(PipelineStage.EXTRACTION):
        estimate = extract(cloudy, prior, fcfg, ecfg)
    t = estimate.transmission

    with timer.stage(PipelineStage.INVERSION):
        j_phy = invert_scattering(cloudy, t, estimate.light, rcfg)
    with timer.stage(PipelineStage.COGNITIVE):
        j_cog = cognitive_adjust(j_phy, prior, cloudy, t, estimate.confidence, fcfg, rcfg)
    with timer.stage(PipelineStage.VISIBILITY):
        omega = visibility_weight(t, rcfg)

    if reference is None:
        logger.warning("No temporal reference; running reference-free (final = J_cog)")
        mode = RunMode.REFERENCE_FREE
    elif rcfg.skip_fusion:
        logger.info("Fusion disabled; final = J_cog")
        mode = RunMode.UNFUSED
    else:
        mode = RunMode.FUSED

    ref_aligned, alignment, final = None, None, j_cog
    if mode == RunMode.FUSED:
        with timer.stage(PipelineStage.ALIGNMENT):
            ref_aligned, alignment = align_reference(reference, j_cog, omega, rcfg)
        with timer.stage(PipelineStage.FUSION):
            final = fuse(j_cog, ref_aligned, omega)

    logger.info(f"Restoration finished in {sum(timer.timings.values()):.1f} ms ({mode.value})")
    return RestorationBundle(
        j_phy=j_phy,
        j_cog=j_cog,
        omega=omega,
        final=final,
        mode=mode,
        estimate=estimate,
        ref_aligned=ref_aligned,
        alignment=alignment,
        timings=timer.timings,
    )


def physical_only(config: PipelineConfig) -> PipelineConfig:
    """Baseline configuration reducing the pipeline to J_phy"""
    restore = config.restore.model_copy(update={"alpha": 0.0, "beta": 0.0, "skip_fusion": True})
    return config.model_copy(update={"restore": restore})


class CloudRemover:
    """Main class for cloud removal"""

    def __init__(
        self,
        config: Optional[PipelineConfig] = None,
        prior_spec: Optional[PriorSpec] = None,
        http_client: Optional[httpx.AsyncClient] = None,
    ):
        """Initialize cloud remover

        Args:
            config: Tunables of every stage (default: PipelineConfig())
            prior_spec: Acquisition channel for the VLM candidate (optional)
            http_client: Transport override for the remote prior channel (optional)
        """
        self.config = config or PipelineConfig()
        self.prior_spec = prior_spec
        self.http_client = http_client

    async def acquire_prior(self, cloudy: Raster) -> Raster:
        """Obtain the VLM candidate through the configured channel"""
        if self.prior_spec is None:
            raise ValueError("A prior spec is required to acquire the VLM candidate.")
        return await acquire_prior(self.prior_spec, cloudy, http_client=self.http_client)

    def restore(
        self, cloudy: Raster, prior: Raster, reference: Optional[Raster] = None
    ) -> RestorationBundle:
        """Run the pipeline on in-memory rasters"""
        try:
            return run_pipeline(
                cloudy,
                prior,
                reference,
                self.config.filter,
                self.config.extraction,
                self.config.restore,
            )
        except Exception as e:
            logger.error(f"Error during restoration: {e}")
            raise

    async def process(
        self,
        cloudy: Raster,
        reference: Optional[Raster] = None,
        prior: Optional[Raster] = None,
    ) -> RestorationBundle:
        """Acquire the prior when none is given, then restore

        Args:
            cloudy: Observed image
            reference: Clear-sky temporal reference (optional)
            prior: Precomputed VLM candidate (optional)

        Returns:
            RestorationBundle
        """
        if prior is None:
            prior = await self.acquire_prior(cloudy)
        return self.restore(cloudy, prior, reference)

    @staticmethod
    def evaluate(bundle: RestorationBundle, truth: Raster) -> QualityReport:
        """Score the final image against clear-sky truth"""
        return metrics.evaluate(bundle.final, truth)
