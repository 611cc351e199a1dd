import logging

from cloud_removal.core.raster import Raster
from cloud_removal.exceptions import ImageIOError, PriorAcquisitionError
from cloud_removal.priors.base import BasePriorSource
from cloud_removal.utils.image_io import read_raster

logger = logging.getLogger(__name__)


class FilePriorSource(BasePriorSource):
    """Candidate produced offline and stored as PNG or TIFF"""

    async def fetch(self, cloudy: Raster) -> Raster:
        path = self.spec.path
        if path is None or not path.exists():
            raise PriorAcquisitionError(f"Prior file not found: {path}")
        try:
            prior = read_raster(path, scale=self.spec.scale, policy=self.spec.nan_policy)
        except ImageIOError as e:
            raise PriorAcquisitionError(f"Cannot decode prior {path}: {e}") from e
        logger.info(f"Loaded prior from {path}")
        return prior

    def describe(self) -> str:
        return f"file {self.spec.path}"
