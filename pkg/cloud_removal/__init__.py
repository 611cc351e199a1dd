from cloud_removal.core.pipeline import CloudRemover, RestorationBundle, run_pipeline
from cloud_removal.schemas.config_schemas import PipelineConfig, PriorSpec
from cloud_removal.utils.constants import PriorMode, RunMode

__all__ = [
    "CloudRemover",
    "PipelineConfig",
    "PriorMode",
    "PriorSpec",
    "RestorationBundle",
    "RunMode",
    "run_pipeline",
]
