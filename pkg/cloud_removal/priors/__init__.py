import logging
from typing import Dict, Optional, Type

import httpx

from cloud_removal.core.raster import Raster
from cloud_removal.priors.base import BasePriorSource
from cloud_removal.priors.file_prior import FilePriorSource
from cloud_removal.priors.remote_prior import RemotePriorSource
from cloud_removal.schemas.config_schemas import PriorSpec
from cloud_removal.utils.constants import PriorMode

logger = logging.getLogger(__name__)

PRIOR_SOURCES: Dict[PriorMode, Type[BasePriorSource]] = {
    PriorMode.FILE: FilePriorSource,
    PriorMode.REMOTE: RemotePriorSource,
}


def create_prior_source(
    spec: PriorSpec, http_client: Optional[httpx.AsyncClient] = None
) -> BasePriorSource:
    if spec.mode == PriorMode.REMOTE:
        return RemotePriorSource(spec, http_client=http_client)
    return PRIOR_SOURCES[spec.mode](spec)


async def acquire_prior(
    spec: PriorSpec, cloudy: Raster, http_client: Optional[httpx.AsyncClient] = None
) -> Raster:
    """Obtain the VLM candidate for a cloudy raster

    Args:
        spec: Acquisition channel
        cloudy: Observed image; the candidate is returned on its grid
        http_client: Transport override for the remote channel

    Returns:
        Candidate raster with the cloudy raster's dimensions, values in [0, 1]
    """
    async with create_prior_source(spec, http_client=http_client) as source:
        logger.debug(f"Acquiring prior from {source.describe()}")
        return await source.acquire(cloudy)


__all__ = [
    "BasePriorSource",
    "FilePriorSource",
    "RemotePriorSource",
    "PRIOR_SOURCES",
    "acquire_prior",
    "create_prior_source",
]
