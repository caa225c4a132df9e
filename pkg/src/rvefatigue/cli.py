"""Command-line entry point: ``rvefatigue <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .md.config import ConfigError, MDConfig, RVEConfig, load_md_config
from .paris import UNIT_SYSTEMS, ParisConstants
from .pipeline import (
    ExtractionConfig,
    FitConfig,
    MacroConfig,
    PipelineConfig,
    PipelineError,
    compare_models,
    format_table,
    load_pipeline_config,
    model_variants,
    run_pipeline,
)
from .pipeline.run import fit_samples, run_md_stage, run_xfem_stage
from .vision.extract import ExtractionSettings, measure_raster
from .vision.raster import read_image, write_png
from .vision.skeleton import overlay
from .xfem.fatigue import DEFAULT_SNAPSHOTS

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pipeline_config(args) -> PipelineConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("pass --config FILE or --preset NAME")
    cfg = load_pipeline_config(args.config, args.preset)
    changes = {}
    if args.seed is not None:
        changes["rve.seed"] = args.seed
    if args.out is not None:
        changes["outdir"] = Path(args.out)
    return cfg.replace(**changes) if changes else cfg


def cmd_md_run(args) -> int:
    if args.config is not None:
        md, extraction = load_md_config(args.config), ExtractionConfig()
    else:
        base = load_pipeline_config(preset=args.preset)
        md, extraction = base.md, base.extraction
    if args.seed is not None:
        md = replace(md, rve=replace(md.rve, seed=args.seed))
    cfg = PipelineConfig(md=md, extraction=extraction, outdir=Path(args.out), write_snapshots=not args.no_snapshots)
    stage_dir = cfg.outdir / "md_rve"
    if stage_dir.exists():
        shutil.rmtree(stage_dir)
    stage_dir.mkdir(parents=True)
    outputs = run_md_stage(cfg, stage_dir)
    print(f"wrote {len(outputs)} files under {stage_dir}")
    return EXIT_OK


def cmd_extract_crack(args) -> int:
    origin = tuple(args.origin) if args.origin is not None else None
    try:
        raster = read_image(args.input, args.scale, origin)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from exc
    settings = ExtractionSettings(
        resolution=raster.scale,
        binarize_threshold=args.threshold if args.threshold == "otsu" else int(args.threshold),
        median_window=args.median,
        mouth=args.mouth,
        face_gap=args.face_gap,
    )
    try:
        ex = measure_raster(raster, settings)
    except ValueError as exc:
        raise PipelineError("crack_vision", str(exc)) from exc
    out = Path(args.out) / "crack_vision"
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    write_png(overlay(ex.binary, ex.skeleton), out / f"{stem}_overlay.png")
    row = f"{stem},{float(ex.length)!r},{float(ex.front[0])!r},{float(ex.front[1])!r}"
    table = out / "cracks.csv"
    new = not table.exists()
    with open(table, "a") as fh:
        if new:
            fh.write("frame,crack_len_A,tip_x_A,tip_y_A\n")
        fh.write(row + "\n")
    print("frame,crack_len_A,tip_x_A,tip_y_A")
    print(row)
    return EXIT_OK


def cmd_fit_paris(args) -> int:
    from .paris import read_samples

    fit = FitConfig(units=args.units, trim=args.trim, window=tuple(args.window) if args.window else None)
    try:
        samples = read_samples(args.input)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read samples from {args.input}: {exc}") from exc
    try:
        const, _, _ = fit_samples(samples, fit)
    except ValueError as exc:
        raise PipelineError("paris_fit", str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    const.save(out)
    print(f"m = {const.m:.6g}  C = {const.C:.6g} ({const.units})  R2 = {const.r2:.4f}  points = {const.n_points}")
    return EXIT_OK


def cmd_xfem_run(args) -> int:
    from .xfem.io import load_model

    try:
        model = load_model(args.model)
        const = ParisConstants.load(args.paris)
        macro = MacroConfig(model, args.da, args.element_size, tuple(args.snapshots))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    seed = int(const.extra.get("seed", RVEConfig().seed))
    cfg = PipelineConfig(md=MDConfig(rve=RVEConfig(seed=seed)), macro=macro, outdir=Path(args.out))
    stage_dir = cfg.outdir / "xfem_core"
    stage_dir.mkdir(parents=True, exist_ok=True)
    run_xfem_stage(cfg, stage_dir, Path(args.paris))
    summary = json.loads((stage_dir / "summary.json").read_text())
    print(f"{summary['cause']} after {summary['cycles']:.0f} cycles, a = {summary['final_length_mm']:.2f} mm")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    manifest = run_pipeline(cfg, use_cache=not args.no_cache)
    for s in manifest.stages:
        print(f"{s.name:<13}{s.status:<9}{s.seconds:8.2f} s")
    print(f"manifest: {cfg.outdir / 'manifest.json'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _pipeline_config(args)
    rows = compare_models(model_variants(cfg), cfg.outdir, workers=args.workers, use_cache=not args.no_cache)
    print(format_table(rows))
    return EXIT_OK if all(r.ok for r in rows) else EXIT_STAGE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rvefatigue", description="Multi-scale fatigue crack growth toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp, default_out=None):
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--preset", choices=("ci", "paper"), help="built-in base configuration")
        sp.add_argument("--seed", type=int, help="override the RVE seed")
        sp.add_argument("--out", default=default_out, help="output directory")

    sp = sub.add_parser("md-run", help="cyclic MD of the RVE plate")
    config_args(sp, "runs/md")
    sp.add_argument("--no-snapshots", action="store_true", help="skip XYZ snapshots")
    sp.set_defaults(func=cmd_md_run, preset_default="ci")

    sp = sub.add_parser("extract-crack", help="measure the crack in one contour image")
    sp.add_argument("--in", dest="input", required=True, help="PNG or PGM frame")
    sp.add_argument("--scale", type=float, help="Angstrom per pixel (default: embedded, else 1)")
    sp.add_argument("--origin", type=float, nargs=2, metavar=("X", "Y"), help="physical position of pixel (0, 0)")
    sp.add_argument("--mouth", default="left", choices=("left", "right", "top", "bottom"))
    sp.add_argument("--threshold", default="128", help="binarization level or 'otsu'")
    sp.add_argument("--median", type=int, default=3, help="median window (odd, >= 3)")
    sp.add_argument("--face-gap", type=float, default=25.0, help="largest opening merged into one band")
    sp.add_argument("--out", default=".", help="output directory")
    sp.set_defaults(func=cmd_extract_crack)

    sp = sub.add_parser("fit-paris", help="fit Paris constants to a samples CSV")
    sp.add_argument("--in", dest="input", required=True, help="CSV with N, a, sigma_max, sigma_min")
    sp.add_argument("--units", default="mpa_sqrt_m", choices=sorted(UNIT_SYSTEMS))
    sp.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"), help="dK window")
    sp.add_argument("--trim", type=float, default=0.10, help="fraction of dK dropped at each end")
    sp.add_argument("--out", default="paris.json")
    sp.set_defaults(func=cmd_fit_paris)

    sp = sub.add_parser("xfem-run", help="XFEM fatigue life of a plate")
    sp.add_argument("--model", required=True, help="plate model TOML")
    sp.add_argument("--paris", required=True, help="paris.json")
    sp.add_argument("--da", type=float, default=1.0, help="crack increment per step (mm)")
    sp.add_argument("--element-size", type=float, default=1.0, help="mesh size (mm)")
    sp.add_argument("--snapshots", type=_floats, default=DEFAULT_SNAPSHOTS, help="cycles for VTK fields")
    sp.add_argument("--out", default="runs/xfem")
    sp.set_defaults(func=cmd_xfem_run)

    sp = sub.add_parser("pipeline", help="MD -> extraction -> fit -> XFEM")
    config_args(sp)
    sp.add_argument("--no-cache", action="store_true", help="rerun every stage")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("compare", help="Paris constants of the four RVE variants")
    config_args(sp)
    sp.add_argument("--workers", type=int, default=1, help="variants run in parallel")
    sp.add_argument("--no-cache", action="store_true", help="rerun every stage")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "preset_default", None) and args.config is None and args.preset is None:
        args.preset = args.preset_default
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"stage {exc.stage} failed: {exc.message}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
