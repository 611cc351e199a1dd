from abc import ABC, abstractmethod

from cloud_removal.core.raster import Raster, check_same_shape
from cloud_removal.exceptions import PriorAcquisitionError
from cloud_removal.schemas.config_schemas import PriorSpec


class BasePriorSource(ABC):
    """Base abstract class for VLM candidate acquisition"""

    def __init__(self, spec: PriorSpec):
        self.spec = spec

    @abstractmethod
    async def fetch(self, cloudy: Raster) -> Raster:
        """Method to obtain the cloud-free candidate for a cloudy image"""
        pass

    @abstractmethod
    def describe(self) -> str:
        """Method to name the channel in logs and manifests"""
        pass

    async def acquire(self, cloudy: Raster) -> Raster:
        """Fetch the candidate and enforce the cloudy image's dimensions"""
        prior = await self.fetch(cloudy)
        try:
            check_same_shape(cloudy, prior)
        except ValueError as e:
            raise PriorAcquisitionError(f"Prior from {self.describe()} does not match: {e}") from e
        return prior

    async def aclose(self) -> None:
        """Release channel resources; sources holding none keep the default"""

    async def __aenter__(self) -> "BasePriorSource":
        return self

    async def __aexit__(self, *exc) -> None:
        await self.aclose()
