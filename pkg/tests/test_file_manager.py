import logging

import numpy as np
import pytest
from conftest import constant_field, constant_raster

from cloud_removal.utils.file_manager import OutputManager
from cloud_removal.utils.image_io import read_raster, write_raster


def test_artifacts_are_written_and_recorded(tmp_path):
    out = tmp_path / "run"
    with OutputManager(out) as manager:
        manager.write_raster("final.png", constant_raster(0.5))
        manager.write_field("t.tif", constant_field(0.25))
        manager.write_json("metrics.json", {"psnr_db": 30.0})
        manager.write_text("eval.txt", "Scene\n")
    assert [p.name for p in manager.written] == ["final.png", "t.tif", "metrics.json", "eval.txt"]
    assert (out / "final.png.json").exists()
    assert (out / "eval.txt").read_text(encoding="utf-8") == "Scene\n"


def test_targets_outside_the_directory_are_refused(tmp_path):
    manager = OutputManager(tmp_path / "run")
    manager.prepare()
    with pytest.raises(ValueError, match="outside"):
        manager.path_for("../escape.tif")


def test_inputs_are_never_overwritten(tmp_path):
    cloudy = write_raster(tmp_path / "cloudy.png", constant_raster(0.5))
    manager = OutputManager(tmp_path, inputs=[cloudy])
    with pytest.raises(ValueError, match="input"):
        manager.write_raster("cloudy.png", constant_raster(0.1))
    with pytest.raises(ValueError, match="input"):
        manager.write_json("cloudy.png.json", {"scale_factor": 1.0})
    np.testing.assert_allclose(read_raster(cloudy).data, 0.5, atol=1e-5)


def test_aborted_run_is_logged(tmp_path, caplog):
    with caplog.at_level(logging.ERROR):
        with pytest.raises(RuntimeError):
            with OutputManager(tmp_path / "run") as manager:
                manager.write_json("partial.json", {})
                raise RuntimeError("boom")
    assert "after writing 1 artifacts" in caplog.text
