from enum import Enum

DEFAULT_PROMPT = "remove cloud"
DEFAULT_TOKEN_ENV = "PRIOR_API_TOKEN"

# PSNR reported for identical images
PSNR_CAP_DB = 99.0

SATURATION_GUARD = 1e-6
WEIGHT_FLOOR = 1e-3
AIRLIGHT_FALLBACK_FRACTION = 0.001


class PriorMode(str, Enum):
    """Where the VLM candidate comes from"""

    FILE = "file"
    REMOTE = "remote"


class RunMode(str, Enum):
    """Restoration modes"""

    FUSED = "fused"
    REFERENCE_FREE = "reference_free"
    UNFUSED = "unfused"


class BaseGuide(str, Enum):
    """Guide used when building base layers"""

    SELF = "self"
    CLOUDY = "cloudy"


class NanPolicy(str, Enum):
    """Handling of non-finite samples at ingestion"""

    CLAMP = "clamp"
    REJECT = "reject"


class PipelineStage(str, Enum):
    """Processing stages, in execution order"""

    EXTRACTION = "extraction"
    INVERSION = "inversion"
    COGNITIVE = "cognitive"
    VISIBILITY = "visibility"
    ALIGNMENT = "alignment"
    FUSION = "fusion"


class OutputNames:
    """File names of run artifacts, one per intermediate pane"""

    FINAL = "final"
    PRIOR = "j_vlm"
    AIRLIGHT = "airlight.json"
    TRANSMISSION = "t.tif"
    CONFIDENCE = "u.tif"
    J_PHY = "j_phy"
    J_COG = "j_cog"
    OMEGA = "omega.tif"
    REF_ALIGNED = "ref_aligned"
    ALIGNMENT = "alignment.json"
    METRICS = "metrics.json"
    CONFIG = "config.json"
    MANIFEST = "run_manifest.json"

    @staticmethod
    def raster(stem: str, suffix: str) -> str:
        """File name for a raster artifact with the chosen format"""
        return f"{stem}.{suffix.lstrip('.')}"


class SceneNames:
    """File stems of a synthesized scene directory"""

    SURFACE = "surface"
    TRANSMISSION = "t.tif"
    AIRLIGHT = "airlight.json"
    CLOUDY = "cloudy"
    PRIOR = "prior"
    REFERENCE = "reference"
    CONFIG = "config.json"
    TRUTH_STEMS = ("surface", "truth")


EVAL_JSON = "eval.json"
EVAL_TEXT = "eval.txt"
