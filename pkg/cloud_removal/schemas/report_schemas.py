"""Serialized run artifacts: quality reports, evaluation tables and the run manifest"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from cloud_removal.utils.constants import RunMode

MEAN_ROW = "mean"


class QualityReport(BaseModel):
    """PSNR and SSIM of a restoration against clear-sky truth"""

    psnr: float = Field(ge=0, description="Decibels over all bands, capped for identical images")
    ssim: float = Field(ge=-1, le=1, description="Single-scale SSIM on brightness")
    per_band_psnr: List[float] = Field(default_factory=list)


class MetricsRecord(BaseModel):
    """metrics.json written by a restoration run"""

    scene: str
    psnr_db: float
    ssim: float
    per_band_psnr: List[float]
    mode: RunMode

    @classmethod
    def from_report(cls, scene: str, report: QualityReport, mode: RunMode) -> "MetricsRecord":
        return cls(
            scene=scene,
            psnr_db=report.psnr,
            ssim=report.ssim,
            per_band_psnr=report.per_band_psnr,
            mode=mode,
        )


class EvalRow(BaseModel):
    scene: str
    psnr_db: float
    ssim: float


class EvalTable(BaseModel):
    """Per-scene scores plus their mean, one row per scene"""

    rows: List[EvalRow]
    mean: EvalRow

    @classmethod
    def from_rows(cls, rows: List[EvalRow]) -> "EvalTable":
        if not rows:
            raise ValueError("Cannot build an evaluation table without rows")
        mean = EvalRow(
            scene=MEAN_ROW,
            psnr_db=sum(r.psnr_db for r in rows) / len(rows),
            ssim=sum(r.ssim for r in rows) / len(rows),
        )
        return cls(rows=rows, mean=mean)

    def to_text(self) -> str:
        """Aligned plain-text table with a trailing mean row"""
        width = max(len("Scene"), max(len(r.scene) for r in [*self.rows, self.mean]))
        header = f"{'Scene':<{width}}  {'PSNR(dB)':>9}  {'SSIM':>7}"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(f"{row.scene:<{width}}  {row.psnr_db:>9.3f}  {row.ssim:>7.4f}")
        lines.append("-" * len(header))
        mean = self.mean
        lines.append(f"{mean.scene:<{width}}  {mean.psnr_db:>9.3f}  {mean.ssim:>7.4f}")
        return "\n".join(lines) + "\n"


class RunInputs(BaseModel):
    cloudy: str
    prior: str
    reference: Optional[str] = None
    truth: Optional[str] = None


class RunManifest(BaseModel):
    """Everything needed to reproduce a run, plus its timings"""

    inputs: RunInputs
    config_path: Optional[str] = None
    output_dir: str
    dump_intermediates: bool = False
    mode: RunMode
    reference_free: bool = False
    remote_prior: bool = False
    airlight_fallback: bool = False
    alignment_fallback: bool = False
    timings_ms: Dict[str, float] = Field(default_factory=dict)
