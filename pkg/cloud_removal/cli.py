"""Command-line interface

Usage:
    cloud-removal run --cloudy P (--prior P | --prior-url URL) [--ref P] --out DIR [options]
    cloud-removal synth --seed N --size N --out DIR [options]
    cloud-removal eval (--pairs CSV | --scenes DIR) --out DIR [options]

Exit codes: 0 success, 1 input or prior failure, 2 configuration error.
"""

import argparse
import asyncio
import csv
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from cloud_removal.core import metrics
from cloud_removal.core.pipeline import CloudRemover, RestorationBundle
from cloud_removal.core.scattering import generate_scene
from cloud_removal.exceptions import ConfigError, ImageIOError, PriorAcquisitionError
from cloud_removal.schemas.report_schemas import (
    EvalRow,
    EvalTable,
    MetricsRecord,
    RunInputs,
    RunManifest,
)
from cloud_removal.utils.config_loader import (
    load_raw_config,
    pipeline_config,
    prior_spec,
    synth_config,
)
from cloud_removal.utils.constants import (
    EVAL_JSON,
    EVAL_TEXT,
    NanPolicy,
    OutputNames,
    PriorMode,
    RunMode,
    SceneNames,
)
from cloud_removal.utils.file_manager import OutputManager
from cloud_removal.utils.image_io import RASTER_SUFFIXES, read_raster

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root logger from --log-level or LOG_LEVEL"""
    name = (level or os.environ.get("LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s | %(levelname)-7s | %(name)s | %(message)s",
        datefmt="%H:%M:%S",
    )


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one config value (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloud-removal",
        description="Physics-guided all-cloud removal with a generative prior",
    )
    parser.add_argument(
        "--log-level", help="DEBUG, INFO, WARNING or ERROR (default: LOG_LEVEL or INFO)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Restore one cloudy scene")
    run.add_argument("--cloudy", type=Path, required=True)
    prior = run.add_mutually_exclusive_group(required=True)
    prior.add_argument("--prior", type=Path, help="VLM candidate file")
    prior.add_argument("--prior-url", help="OpenAI-compatible image-editing endpoint")
    run.add_argument("--ref", type=Path, help="Clear-sky temporal reference")
    run.add_argument("--truth", type=Path, help="Clear-sky truth for metrics.json")
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--scene", help="Scene name for metrics.json (default: input directory name)")
    run.add_argument("--dump-intermediates", action="store_true")
    run.add_argument("--format", choices=["tif", "png"], default="tif", help="Raster output format")
    run.add_argument("--reflectance-scale", type=float, help="Scale for integer inputs")
    run.add_argument(
        "--nan-policy", choices=[p.value for p in NanPolicy], default=NanPolicy.CLAMP.value
    )
    run.add_argument("--alpha", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--t0", type=float)
    run.add_argument("--skip-fusion", action="store_true", default=None)
    run.add_argument("--prompt")
    run.add_argument("--prior-timeout", type=float)
    run.add_argument("--prior-model")
    _add_config_args(run)

    synth = commands.add_parser("synth", help="Generate a synthetic scene with ground truth")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--size", type=int)
    synth.add_argument("--bands", type=int)
    synth.add_argument("--airlight", type=float, nargs="+")
    synth.add_argument("--thick-core-fraction", type=float)
    synth.add_argument("--transition-fraction", type=float)
    synth.add_argument("--thin-fraction", type=float)
    synth.add_argument("--transmission-floor", type=float)
    synth.add_argument("--format", choices=["tif", "png"], default="tif")
    _add_config_args(synth)

    evaluate = commands.add_parser("eval", help="Score results against truth")
    pairs = evaluate.add_mutually_exclusive_group(required=True)
    pairs.add_argument("--pairs", type=Path, help="CSV of scene,result,truth")
    pairs.add_argument("--scenes", type=Path, help="Directory of scene sub-directories")
    evaluate.add_argument("--out", type=Path, required=True)
    evaluate.add_argument("--max-concurrent", type=int, default=4)

    return parser


def _given(**flags) -> dict:
    return {key: value for key, value in flags.items() if value is not None}


def _dump_intermediates(out: OutputManager, bundle: RestorationBundle, prior, suffix: str) -> None:
    estimate = bundle.estimate
    out.write_raster(OutputNames.raster(OutputNames.PRIOR, suffix), prior)
    out.write_json(
        OutputNames.AIRLIGHT,
        {
            "airlight": estimate.light.tolist(),
            "used_fallback": estimate.airlight_fallback,
            "omega_pixels": int(estimate.omega_mask.sum()),
            "lambda_phy": estimate.lambda_phy,
            "lambda_hall": estimate.lambda_hall,
        },
    )
    out.write_field(OutputNames.TRANSMISSION, estimate.transmission)
    out.write_field(OutputNames.CONFIDENCE, estimate.confidence)
    out.write_raster(OutputNames.raster(OutputNames.J_PHY, suffix), bundle.j_phy)
    out.write_raster(OutputNames.raster(OutputNames.J_COG, suffix), bundle.j_cog)
    out.write_field(OutputNames.OMEGA, bundle.omega)
    if bundle.ref_aligned is not None:
        out.write_raster(OutputNames.raster(OutputNames.REF_ALIGNED, suffix), bundle.ref_aligned)
        out.write_json(OutputNames.ALIGNMENT, bundle.alignment.to_dict())


def cmd_run(args: argparse.Namespace) -> int:
    """Restore one scene and write its artifacts"""
    try:
        raw = load_raw_config(args.config, args.overrides)
        config = pipeline_config(
            raw,
            _given(
                alpha=args.alpha,
                beta=args.beta,
                gamma=args.gamma,
                t0=args.t0,
                skip_fusion=args.skip_fusion,
            ),
        )
        if args.prior_url:
            channel = {"mode": PriorMode.REMOTE.value, "endpoint": args.prior_url}
        else:
            channel = {
                "mode": PriorMode.FILE.value,
                "path": str(args.prior),
                "nan_policy": args.nan_policy,
            }
            channel.update(_given(scale=args.reflectance_scale))
        channel.update(
            _given(prompt=args.prompt, timeout=args.prior_timeout, model=args.prior_model)
        )
        spec = prior_spec(raw, channel)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    inputs = [p for p in (args.cloudy, args.prior, args.ref, args.truth) if p is not None]
    policy = NanPolicy(args.nan_policy)
    try:
        missing = [str(p) for p in inputs if not p.exists()]
        if missing:
            raise ImageIOError(f"Input files not found: {missing}")

        cloudy = read_raster(args.cloudy, scale=args.reflectance_scale, policy=policy)
        reference = (
            read_raster(args.ref, scale=args.reflectance_scale, policy=policy)
            if args.ref
            else None
        )
        truth = (
            read_raster(args.truth, scale=args.reflectance_scale, policy=policy)
            if args.truth
            else None
        )

        remover = CloudRemover(config=config, prior_spec=spec)
        start = time.perf_counter()
        prior = asyncio.run(remover.acquire_prior(cloudy))
        acquisition_ms = (time.perf_counter() - start) * 1000.0

        bundle = remover.restore(cloudy, prior, reference)
        report = remover.evaluate(bundle, truth) if truth is not None else None
    except (ImageIOError, PriorAcquisitionError, ValueError) as e:
        logger.error(f"Run failed: {e}")
        return EXIT_FAILURE

    suffix = args.format
    scene = args.scene or args.cloudy.resolve().parent.name
    out = OutputManager(args.out, inputs=inputs)
    try:
        with out:
            out.write_raster(OutputNames.raster(OutputNames.FINAL, suffix), bundle.final)
            effective = {
                "pipeline": config.model_dump(mode="json"),
                "prior": spec.model_dump(mode="json"),
            }
            out.write_json(OutputNames.CONFIG, effective)
            if report is not None:
                record = MetricsRecord.from_report(scene, report, bundle.mode)
                out.write_json(OutputNames.METRICS, record.model_dump(mode="json"))
                logger.info(f"{scene}: PSNR={report.psnr:.3f} dB, SSIM={report.ssim:.4f}")
            if args.dump_intermediates:
                _dump_intermediates(out, bundle, prior, suffix)

            manifest = RunManifest(
                inputs=RunInputs(
                    cloudy=str(args.cloudy),
                    prior=args.prior_url or str(args.prior),
                    reference=str(args.ref) if args.ref else None,
                    truth=str(args.truth) if args.truth else None,
                ),
                config_path=str(args.config) if args.config else None,
                output_dir=str(args.out),
                dump_intermediates=args.dump_intermediates,
                mode=bundle.mode,
                reference_free=bundle.mode == RunMode.REFERENCE_FREE,
                remote_prior=spec.mode == PriorMode.REMOTE,
                airlight_fallback=bundle.estimate.airlight_fallback,
                alignment_fallback=bool(bundle.alignment and bundle.alignment.used_fallback),
                timings_ms={"prior_acquisition": acquisition_ms, **bundle.timings},
            )
            out.write_json(OutputNames.MANIFEST, manifest.model_dump(mode="json"))
    except (ImageIOError, OSError, ValueError) as e:
        logger.error(f"Cannot write outputs: {e}")
        return EXIT_FAILURE

    logger.info(f"Wrote {len(out.written)} artifacts to {args.out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic scene with every ground-truth plane"""
    try:
        raw = load_raw_config(args.config, args.overrides)
        cfg = synth_config(
            raw,
            _given(
                seed=args.seed,
                size=args.size,
                bands=args.bands,
                airlight=tuple(args.airlight) if args.airlight else None,
                thick_core_fraction=args.thick_core_fraction,
                transition_fraction=args.transition_fraction,
                thin_fraction=args.thin_fraction,
                transmission_floor=args.transmission_floor,
            ),
        )
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    scene = generate_scene(cfg)
    suffix = args.format
    try:
        with OutputManager(args.out) as out:
            out.write_raster(OutputNames.raster(SceneNames.SURFACE, suffix), scene.surface)
            out.write_field(SceneNames.TRANSMISSION, scene.transmission)
            out.write_json(SceneNames.AIRLIGHT, {"airlight": scene.light.tolist()})
            out.write_raster(OutputNames.raster(SceneNames.CLOUDY, suffix), scene.cloudy)
            out.write_raster(OutputNames.raster(SceneNames.PRIOR, suffix), scene.prior)
            out.write_raster(OutputNames.raster(SceneNames.REFERENCE, suffix), scene.reference)
            out.write_json(SceneNames.CONFIG, {"synth": cfg.model_dump(mode="json")})
    except (ImageIOError, OSError) as e:
        logger.error(f"Cannot write scene: {e}")
        return EXIT_FAILURE

    logger.info(f"Synthesized scene seed={cfg.seed} size={cfg.size} into {args.out}")
    return EXIT_OK


def _find_raster(directory: Path, stems: Sequence[str]) -> Path:
    for stem in stems:
        for suffix in sorted(RASTER_SUFFIXES):
            candidate = directory / f"{stem}{suffix}"
            if candidate.exists():
                return candidate
    raise ImageIOError(f"No {'/'.join(stems)} raster in {directory}")


def read_pairs(path: Path) -> List[Tuple[str, Path, Path]]:
    """Rows of scene,result,truth; a header row is optional, paths are CSV-relative"""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
    except OSError as e:
        raise ImageIOError(f"Cannot read pairs file {path}: {e}") from e

    if rows and [c.strip().lower() for c in rows[0]] == ["scene", "result", "truth"]:
        rows = rows[1:]
    pairs = []
    for row in rows:
        if len(row) != 3:
            raise ImageIOError(f"Pairs rows need scene,result,truth; got {row}")
        scene, result, truth = (c.strip() for c in row)
        pairs.append((scene, path.parent / result, path.parent / truth))
    return pairs


def scan_scenes(directory: Path) -> List[Tuple[str, Path, Path]]:
    """One pair per sub-directory holding final.* and surface.* (or truth.*)"""
    if not directory.is_dir():
        raise ImageIOError(f"Scenes directory not found: {directory}")
    return [
        (
            sub.name,
            _find_raster(sub, (OutputNames.FINAL,)),
            _find_raster(sub, SceneNames.TRUTH_STEMS),
        )
        for sub in sorted(p for p in directory.iterdir() if p.is_dir())
    ]


async def _score_pairs(pairs: List[Tuple[str, Path, Path]], max_concurrent: int) -> List[EvalRow]:
    semaphore = asyncio.Semaphore(max_concurrent)

    def score(scene: str, result: Path, truth: Path) -> EvalRow:
        report = metrics.evaluate(read_raster(result), read_raster(truth))
        return EvalRow(scene=scene, psnr_db=report.psnr, ssim=report.ssim)

    async def bounded(pair: Tuple[str, Path, Path]) -> EvalRow:
        async with semaphore:
            return await asyncio.to_thread(score, *pair)

    return list(await asyncio.gather(*(bounded(pair) for pair in pairs)))


def cmd_eval(args: argparse.Namespace) -> int:
    """Score result/truth pairs and write eval.json and eval.txt"""
    if args.max_concurrent < 1:
        logger.error("--max-concurrent must be at least 1")
        return EXIT_CONFIG
    try:
        pairs = read_pairs(args.pairs) if args.pairs else scan_scenes(args.scenes)
        if not pairs:
            raise ImageIOError("No result/truth pairs to evaluate")
        rows = asyncio.run(_score_pairs(pairs, args.max_concurrent))
    except (ImageIOError, ValueError) as e:
        logger.error(f"Evaluation failed: {e}")
        return EXIT_FAILURE

    table = EvalTable.from_rows(rows)
    protected = [p for _, result, truth in pairs for p in (result, truth)]
    try:
        with OutputManager(args.out, inputs=protected) as out:
            out.write_json(EVAL_JSON, table.model_dump(mode="json"))
            out.write_text(EVAL_TEXT, table.to_text())
    except (OSError, ValueError) as e:
        logger.error(f"Cannot write evaluation: {e}")
        return EXIT_FAILURE
    print(table.to_text(), end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "eval": cmd_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
