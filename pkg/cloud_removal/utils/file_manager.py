import logging
from pathlib import Path
from typing import Iterable, List

from cloud_removal.core.raster import Raster, ScalarField
from cloud_removal.utils.image_io import sidecar_path, write_field, write_json, write_raster

logger = logging.getLogger(__name__)


class OutputManager:
    """Class for writing run artifacts under one output directory

    Refuses any target outside the directory and any target that is one of the
    run's inputs (or an input's sidecar).
    """

    def __init__(self, output_dir: str | Path, inputs: Iterable[str | Path] = ()):
        self.output_dir = Path(output_dir)
        self._protected = set()
        for item in inputs:
            resolved = Path(item).resolve()
            self._protected.update({resolved, sidecar_path(resolved)})
        self._written: List[Path] = []

    def prepare(self) -> Path:
        """Create the output directory if needed"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Output directory: {self.output_dir}")
        return self.output_dir

    def path_for(self, name: str) -> Path:
        """Target path for an artifact

        Args:
            name: File name relative to the output directory

        Returns:
            Path under the output directory
        """
        target = (self.output_dir / name).resolve()
        if self.output_dir.resolve() not in target.parents:
            raise ValueError(f"Artifact {name} would be written outside {self.output_dir}")
        if target in self._protected or sidecar_path(target) in self._protected:
            raise ValueError(f"Refusing to overwrite input file {target}")
        return target

    def write_raster(self, name: str, raster: Raster) -> Path:
        return self._record(write_raster(self.path_for(name), raster))

    def write_field(self, name: str, field: ScalarField) -> Path:
        return self._record(write_field(self.path_for(name), field))

    def write_json(self, name: str, payload: dict) -> Path:
        return self._record(write_json(self.path_for(name), payload))

    def write_text(self, name: str, text: str) -> Path:
        path = self.path_for(name)
        path.write_text(text, encoding="utf-8")
        return self._record(path)

    def _record(self, path: Path) -> Path:
        self._written.append(path)
        return path

    @property
    def written(self) -> List[Path]:
        """Artifacts written so far, in order"""
        return list(self._written)

    def __enter__(self) -> "OutputManager":
        self.prepare()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None:
            logger.error(f"Run aborted after writing {len(self._written)} artifacts")
