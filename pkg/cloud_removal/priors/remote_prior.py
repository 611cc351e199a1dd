import asyncio
import base64
import binascii
import logging
import os
import weakref
from typing import Dict, Optional

import cv2
import httpx
import numpy as np
from openai import (
    NOT_GIVEN,
    APIConnectionError,
    APIStatusError,
    APITimeoutError,
    AsyncOpenAI,
)

from cloud_removal.core.raster import Raster
from cloud_removal.exceptions import ImageIOError, PriorAcquisitionError
from cloud_removal.priors.base import BasePriorSource
from cloud_removal.schemas.config_schemas import PriorSpec
from cloud_removal.utils.image_io import decode_image, encode_png

logger = logging.getLogger(__name__)

UPLOAD_NAME = "cloudy.png"

_EndpointSlots = Dict[str, asyncio.Semaphore]


class RemotePriorSource(BasePriorSource):
    """Candidate requested from an OpenAI-compatible image-editing endpoint

    One multipart POST carries the cloudy image (8-bit PNG) and the prompt; the
    response holds the edited image. Responses of a different size are resampled
    bilinearly onto the cloudy grid.

    Requests to one endpoint share a semaphore of spec.max_concurrent slots per
    event loop, however many sources are created.
    """

    _semaphores: "weakref.WeakKeyDictionary[asyncio.AbstractEventLoop, _EndpointSlots]" = (
        weakref.WeakKeyDictionary()
    )

    @classmethod
    def endpoint_semaphore(cls, spec: PriorSpec) -> asyncio.Semaphore:
        """Semaphore shared by every request to spec.endpoint on the running loop

        The first spec seen for an endpoint fixes its number of slots.
        """
        slots = cls._semaphores.setdefault(asyncio.get_running_loop(), {})
        if spec.endpoint not in slots:
            slots[spec.endpoint] = asyncio.Semaphore(spec.max_concurrent)
        return slots[spec.endpoint]

    def __init__(
        self,
        spec: PriorSpec,
        http_client: Optional[httpx.AsyncClient] = None,
        semaphore: Optional[asyncio.Semaphore] = None,
    ):
        super().__init__(spec)
        self._http_client = http_client
        self._semaphore = semaphore
        token = os.environ.get(spec.token_env)
        if not token:
            logger.debug(f"{spec.token_env} is not set; calling {spec.endpoint} without a token")
        self._client = AsyncOpenAI(
            api_key=token or "",
            base_url=spec.endpoint,
            timeout=spec.timeout,
            max_retries=0,
            http_client=http_client,
        )

    def describe(self) -> str:
        return f"endpoint {self.spec.endpoint}"

    def _shared_semaphore(self) -> asyncio.Semaphore:
        return self._semaphore or self.endpoint_semaphore(self.spec)

    async def aclose(self) -> None:
        # An injected transport belongs to the caller
        if self._http_client is None:
            await self._client.close()

    async def fetch(self, cloudy: Raster) -> Raster:
        if cloudy.bands not in (1, 3):
            raise PriorAcquisitionError(
                f"The remote channel sends 1- or 3-band images, got {cloudy.bands} bands; "
                "use a prior file instead"
            )

        try:
            async with self._shared_semaphore():
                response = await self._client.images.edit(
                    image=(UPLOAD_NAME, encode_png(cloudy), "image/png"),
                    prompt=self.spec.prompt,
                    model=self.spec.model or NOT_GIVEN,
                )
            payload = await self._payload_bytes(response)
        except APITimeoutError as e:
            raise PriorAcquisitionError(
                f"Prior request to {self.spec.endpoint} timed out after {self.spec.timeout}s"
            ) from e
        except APIStatusError as e:
            raise PriorAcquisitionError(
                f"Prior endpoint {self.spec.endpoint} answered HTTP {e.status_code}: {e.message}"
            ) from e
        except APIConnectionError as e:
            raise PriorAcquisitionError(
                f"Cannot reach prior endpoint {self.spec.endpoint}: {e}"
            ) from e
        except httpx.HTTPError as e:
            raise PriorAcquisitionError(f"Cannot download prior image: {e}") from e

        try:
            arr = decode_image(payload)
        except ImageIOError as e:
            raise PriorAcquisitionError(f"Undecodable prior from {self.spec.endpoint}: {e}") from e

        prior = Raster.from_array(self._match_bands(arr, cloudy.bands))
        if prior.shape != cloudy.shape:
            logger.warning(
                f"Prior returned at {prior.shape}, resampling to {cloudy.shape} (bilinear)"
            )
            prior = self._resample(prior, cloudy.shape)
        logger.info(f"Received prior from {self.spec.endpoint}")
        return prior

    async def _payload_bytes(self, response) -> bytes:
        if not response.data:
            raise PriorAcquisitionError("Prior endpoint returned no image")
        item = response.data[0]
        if item.b64_json:
            try:
                return base64.b64decode(item.b64_json, validate=True)
            except (binascii.Error, ValueError) as e:
                raise PriorAcquisitionError(f"Prior payload is not valid base64: {e}") from e
        if item.url:
            if self._http_client is not None:
                return await self._download(self._http_client, item.url)
            async with httpx.AsyncClient(timeout=self.spec.timeout) as client:
                return await self._download(client, item.url)
        raise PriorAcquisitionError("Prior endpoint returned neither image data nor a URL")

    async def _download(self, client: httpx.AsyncClient, url: str) -> bytes:
        download = await client.get(url, timeout=self.spec.timeout)
        download.raise_for_status()
        return download.content

    @staticmethod
    def _match_bands(arr: np.ndarray, bands: int) -> np.ndarray:
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        if arr.shape[2] == bands:
            return arr
        if bands == 1:
            return arr.mean(axis=2, keepdims=True)
        if arr.shape[2] == 1:
            return np.repeat(arr, bands, axis=2)
        raise PriorAcquisitionError(f"Prior has {arr.shape[2]} bands, expected {bands}")

    @staticmethod
    def _resample(prior: Raster, shape: tuple[int, int]) -> Raster:
        height, width = shape
        data = np.ascontiguousarray(prior.data)
        resized = cv2.resize(data, (width, height), interpolation=cv2.INTER_LINEAR)
        if resized.ndim == 2:
            resized = resized[:, :, np.newaxis]
        return Raster(np.clip(resized, 0.0, 1.0))
