class ConfigError(ValueError):
    """Configuration could not be read or failed validation"""


class PriorAcquisitionError(RuntimeError):
    """The VLM candidate could not be obtained"""


class ImageIOError(OSError):
    """A raster file could not be read or written"""
