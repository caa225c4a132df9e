"""End-to-end run: MD RVE -> crack extraction -> Paris fit -> XFEM life, with digest caching."""

from __future__ import annotations

import hashlib
import json
import math
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..md.dynamics import InstabilityError, RelaxationError, maxwell_velocities, relax
from ..md.io import read_cycle_records, write_cycle_records, write_xyz
from ..md.loading import CycleRecord, run_cyclic_loading
from ..md.stress import virial_stress
from ..md.units import EV_A3_TO_GPA
from ..paris import (
    CycleSample,
    NoGrowthError,
    ParisConstants,
    fit_paris,
    growth_points,
    read_samples,
    write_samples,
)
from ..vision.extract import measure_raster
from ..vision.raster import read_image, write_png, write_raster_png
from ..vision.skeleton import overlay
from ..xfem.fatigue import StopCriteria, run_fatigue
from ..xfem.io import write_crack_path, write_life_curve, write_vtk
from .config import FitConfig, PipelineConfig

STAGES = ("md_rve", "crack_vision", "paris_fit", "xfem_core")
CRACK_COLUMNS = ("frame", "crack_len_A", "tip_x_A", "tip_y_A")


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


@dataclass
class StageResult:
    name: str
    status: str  # ran | cached | supplied | failed | skipped
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "status": self.status,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "seconds": round(self.seconds, 3),
        }
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class RunManifest:
    """Per-stage status, file digests and timings of one pipeline run."""

    outdir: Path
    seed: int
    version: str = __version__
    stages: list[StageResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(s.status != "failed" for s in self.stages)

    @property
    def failed_stage(self) -> str | None:
        return next((s.name for s in self.stages if s.status == "failed"), None)

    def stage(self, name: str) -> StageResult:
        return next(s for s in self.stages if s.name == name)

    def digests(self) -> dict[str, dict[str, str]]:
        """Stage name -> {relative path: sha256} over inputs and outputs."""
        return {s.name: {**s.inputs, **s.outputs} for s in self.stages}

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "ok": self.ok,
            "stages": [s.to_dict() for s in self.stages],
        }

    def save(self, path: str | Path | None = None) -> Path:
        path = Path(path) if path is not None else self.outdir / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        stages = [
            StageResult(s["name"], s["status"], s["inputs"], s["outputs"], s["seconds"], s.get("error"))
            for s in d["stages"]
        ]
        return cls(Path(path).parent, d["seed"], d["version"], stages)


class _Stage:
    """Bookkeeping for one stage directory: cache key, digests, stage.json."""

    def __init__(self, root: Path, name: str, params: dict, inputs: list[Path]):
        self.root = root
        self.name = name
        self.dir = root / name
        self.inputs = {self.rel(p): file_digest(p) for p in inputs}
        self.key = hashlib.sha256(
            _canonical({"stage": name, "version": __version__, "params": params, "inputs": self.inputs}).encode()
        ).hexdigest()

    def rel(self, p: Path) -> str:
        try:
            return Path(p).resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(Path(p).resolve())

    def cached(self) -> dict[str, str] | None:
        meta = self.dir / "stage.json"
        if not meta.exists():
            return None
        try:
            d = json.loads(meta.read_text())
        except json.JSONDecodeError:
            return None
        if d.get("key") != self.key:
            return None
        outputs = d.get("outputs", {})
        for rel, digest in outputs.items():
            p = self.root / rel
            if not p.exists() or file_digest(p) != digest:
                return None
        return outputs

    def fresh(self) -> None:
        if self.dir.exists():
            shutil.rmtree(self.dir)
        self.dir.mkdir(parents=True)

    def commit(self, outputs: list[Path]) -> dict[str, str]:
        digests = {self.rel(p): file_digest(p) for p in sorted(outputs)}
        meta = {"key": self.key, "inputs": self.inputs, "outputs": digests}
        (self.dir / "stage.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return digests


def _execute(manifest: RunManifest, stage: _Stage, body: Callable[[], list[Path]], use_cache: bool) -> StageResult:
    t0 = time.perf_counter()
    if use_cache:
        hit = stage.cached()
        if hit is not None:
            res = StageResult(stage.name, "cached", stage.inputs, hit, time.perf_counter() - t0)
            manifest.stages.append(res)
            return res
    stage.fresh()
    try:
        outputs = body()
    except PipelineError as exc:
        res = StageResult(stage.name, "failed", stage.inputs, {}, time.perf_counter() - t0, exc.message)
        manifest.stages.append(res)
        raise
    res = StageResult(stage.name, "ran", stage.inputs, stage.commit(outputs), time.perf_counter() - t0)
    manifest.stages.append(res)
    return res


# ---- stage bodies ----------------------------------------------------------


def run_md_stage(cfg: PipelineConfig, outdir: Path) -> list[Path]:
    """Build, relax and cycle the RVE; stream each emitted frame to disk.

    Only the live system is held in memory: every emitted raster and
    snapshot is written and dropped before the next cycle starts.
    """
    rve, pot, prog = cfg.md.rve, cfg.md.potential, cfg.md.loading
    ex = cfg.extraction
    frames = outdir / "frames"
    snaps = outdir / "snapshots"
    frames.mkdir()
    if cfg.write_snapshots:
        snaps.mkdir()
    written: list[Path] = []

    def emit(rec: CycleRecord, system) -> None:
        tag = f"{rec.cycle:04d}"
        png = frames / f"frame_{tag}.png"
        write_raster_png(rec.raster, png, seed=rve.seed, cycle=rec.cycle)
        written.append(png)
        rec.raster = None
        if cfg.write_snapshots:
            vm = virial_stress(system, pot).von_mises * EV_A3_TO_GPA
            xyz = snaps / f"snapshot_{tag}.xyz"
            write_xyz(system, xyz, vm, {"seed": rve.seed, "cycle": rec.cycle})
            written.append(xyz)

    try:
        system = rve.build()
        relax(system, pot, rve.relax_tolerance)
        maxwell_velocities(system, rve.temperature, rve.seed)
        records = run_cyclic_loading(
            system, pot, prog,
            emit_every=ex.emit_every,
            settings=ex.settings,
            sample_radius=ex.sample_radius,
            average_steps=ex.average_steps,
            on_emit=emit,
        )
    except (InstabilityError, RelaxationError, ValueError) as exc:
        raise PipelineError("md_rve", str(exc)) from exc
    cycles = outdir / "cycles.csv"
    write_cycle_records(records, cycles, seed=rve.seed)
    return [cycles, *written]


def run_vision_stage(cfg: PipelineConfig, outdir: Path, md_dir: Path) -> list[Path]:
    """Measure every persisted frame, one at a time, and pair lengths with tip stresses.

    The sample length is the running maximum of the measured lengths, so a
    crack whose faces touch again in a later frame is not read as healing.
    """
    seed = cfg.seed
    records = {r.cycle: r for r in read_cycle_records(md_dir / "cycles.csv")}
    overlays = outdir / "overlays"
    overlays.mkdir()
    rows: list[tuple] = []
    samples: list[CycleSample] = []
    outputs: list[Path] = []
    longest = 0.0
    for png in sorted((md_dir / "frames").glob("frame_*.png")):
        cycle = int(png.stem.split("_")[1])
        raster = read_image(png)
        try:
            ex = measure_raster(raster, cfg.extraction.settings)
        except ValueError as exc:
            raise PipelineError("crack_vision", f"{png.name}: {exc}") from exc
        ov = overlays / f"{png.stem}_overlay.png"
        write_png(overlay(ex.binary, ex.skeleton), ov, {"seed": seed})
        outputs.append(ov)
        rows.append((png.stem, ex.length, ex.front[0], ex.front[1]))
        longest = max(longest, ex.length)
        rec = records.get(cycle)
        if rec is None:
            raise PipelineError("crack_vision", f"no cycle record for {png.name}")
        if math.isfinite(rec.sigma_y_max_GPa) and longest > 0:
            smin = rec.sigma_y_min_GPa if math.isfinite(rec.sigma_y_min_GPa) else 0.0
            samples.append(CycleSample(float(cycle), longest, rec.sigma_y_max_GPa, min(smin, rec.sigma_y_max_GPa)))
    if not rows:
        raise PipelineError("crack_vision", "no frames to measure")
    cracks = outdir / "cracks.csv"
    _write_rows(cracks, CRACK_COLUMNS, rows, seed)
    sample_path = outdir / "samples.csv"
    write_samples(sample_path, samples, seed=seed)
    return [cracks, sample_path, *outputs]


def fit_samples(samples: list[CycleSample], fit: FitConfig) -> tuple[ParisConstants, np.ndarray, np.ndarray]:
    """Growth points and the Paris fit of one sample series.

    Raises:
        NoGrowthError: fewer than two usable growth points.
        ValueError: the points do not define a Paris law (non-positive slope).
    """
    if len(samples) < 3:
        raise NoGrowthError(f"no growth points: only {len(samples)} cycle samples")
    dk, rate = growth_points(samples, fit.window, fit.trim)
    if len(dk) < 2:
        raise NoGrowthError(f"no growth points: {len(dk)} usable (dK, da/dN) pairs")
    try:
        const = fit_paris(dk, rate, fit.units)
    except NoGrowthError:
        raise
    except ValueError as exc:
        raise ValueError(f"no Paris law in {len(dk)} growth points: {exc}") from exc
    return const, dk, rate


def run_fit_stage(cfg: PipelineConfig, outdir: Path, samples_path: Path) -> list[Path]:
    try:
        samples = read_samples(samples_path)
        const, dk, rate = fit_samples(samples, cfg.fit)
    except NoGrowthError as exc:
        raise PipelineError("paris_fit", str(exc)) from exc
    except KeyError as exc:
        raise PipelineError("paris_fit", f"bad samples: missing column {exc}") from exc
    except ValueError as exc:
        raise PipelineError("paris_fit", str(exc)) from exc
    const = ParisConstants(const.C, const.m, const.units, const.r2, const.n_points, const.dk_window,
                           {"seed": cfg.seed})
    paris = outdir / "paris.json"
    const.save(paris)
    points = outdir / "points.csv"
    _write_rows(points, ("dK", "da_dN"), list(zip(dk, rate)), cfg.seed)
    return [paris, points]


def run_xfem_stage(cfg: PipelineConfig, outdir: Path, paris_path: Path) -> list[Path]:
    mc = cfg.macro
    try:
        const = ParisConstants.load(paris_path)
        history, snaps, crack = run_fatigue(
            mc.model, const, da=mc.da,
            stop=StopCriteria(boundary_margin=mc.boundary_margin, max_steps=mc.max_steps),
            element_size=mc.element_size, snapshots=mc.snapshots,
        )
    except (KeyError, ValueError, RuntimeError) as exc:
        raise PipelineError("xfem_core", str(exc)) from exc
    life = outdir / "life_curve.csv"
    write_life_curve(history, life, seed=cfg.seed)
    path = outdir / "crack_path.csv"
    write_crack_path(crack.vertices, path, seed=cfg.seed)
    outputs = [life, path]
    for snap in snaps:
        vtk = outdir / f"field_{int(snap.cycle):06d}.vtk"
        write_vtk(snap.solution, vtk, title=f"cycle {float(snap.cycle)!r} seed {cfg.seed}")
        outputs.append(vtk)
    summary = outdir / "summary.json"
    summary.write_text(json.dumps({
        "seed": cfg.seed,
        "cycles": history.cycles,
        "fractured": history.fractured,
        "cause": history.cause,
        "final_length_mm": float(history.a[-1]),
        "steps": len(history.records) - 1,
    }, indent=2, sort_keys=True) + "\n")
    outputs.append(summary)
    return outputs


def _write_rows(path: Path, header, rows, seed: int | None) -> None:
    with open(path, "w") as fh:
        if seed is not None:
            fh.write(f"# seed={int(seed)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")


# ---- orchestration ---------------------------------------------------------


def _micro_params(cfg: PipelineConfig) -> dict:
    d = cfg.to_dict()
    return {k: d[k] for k in ("rve", "potential", "loading", "extraction")} | {"snapshots": cfg.write_snapshots}


def run_micro(cfg: PipelineConfig, manifest: RunManifest, use_cache: bool = True) -> Path:
    """MD, extraction and fit stages (or their supplied stand-ins); returns paris.json."""
    root = cfg.outdir
    fit = cfg.fit
    fit_params = {"fit": cfg.fit.to_dict()}
    if fit.supplies_constants:
        for name in ("md_rve", "crack_vision"):
            manifest.stages.append(StageResult(name, "skipped"))
        if fit.paris_file is not None:
            src = Path(fit.paris_file)
            if not src.exists():
                raise PipelineError("paris_fit", f"supplied paris file {src} not found")
            stage = _Stage(root, "paris_fit", fit_params, [src])
        else:
            stage = _Stage(root, "paris_fit", fit_params, [])

        def supplied() -> list[Path]:
            try:
                if fit.paris_file is not None:
                    const = ParisConstants.load(fit.paris_file)
                else:
                    const = ParisConstants.from_mapping(fit.constants)
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise PipelineError("paris_fit", f"bad supplied constants: {exc}") from exc
            const = ParisConstants(const.C, const.m, const.units, const.r2, const.n_points, const.dk_window,
                                   {**const.extra, "seed": cfg.seed})
            out = stage.dir / "paris.json"
            const.save(out)
            return [out]

        res = _execute(manifest, stage, supplied, use_cache)
        if res.status == "ran":
            res.status = "supplied"
        return stage.dir / "paris.json"

    if fit.samples_file is not None:
        samples = Path(fit.samples_file)
        if not samples.exists():
            raise PipelineError("paris_fit", f"supplied samples file {samples} not found")
        for name in ("md_rve", "crack_vision"):
            manifest.stages.append(StageResult(name, "skipped"))
    else:
        md = _Stage(root, "md_rve", _micro_params(cfg), [])
        _execute(manifest, md, lambda: run_md_stage(cfg, md.dir), use_cache)
        vis_inputs = [md.dir / "cycles.csv", *sorted((md.dir / "frames").glob("frame_*.png"))]
        vis = _Stage(root, "crack_vision", {"extraction": cfg.extraction.to_dict()}, vis_inputs)
        _execute(manifest, vis, lambda: run_vision_stage(cfg, vis.dir, md.dir), use_cache)
        samples = vis.dir / "samples.csv"
    fit_stage = _Stage(root, "paris_fit", fit_params | {"seed": cfg.seed}, [samples])
    _execute(manifest, fit_stage, lambda: run_fit_stage(cfg, fit_stage.dir, samples), use_cache)
    return fit_stage.dir / "paris.json"


def run_pipeline(cfg: PipelineConfig, use_cache: bool = True, macro: bool = True) -> RunManifest:
    """Run every stage in order and write ``<outdir>/manifest.json``.

    A stage whose parameters and input digests match its last run is
    reused. Set ``macro=False`` to stop after the Paris fit.

    Raises:
        PipelineError: a stage failed; the manifest is still written and
            names the failing stage.
    """
    root = cfg.outdir
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(root, cfg.seed)
    try:
        paris = run_micro(cfg, manifest, use_cache)
        if macro:
            xf = _Stage(root, "xfem_core", {"macro": cfg.macro.to_dict(), "seed": cfg.seed}, [paris])
            _execute(manifest, xf, lambda: run_xfem_stage(cfg, xf.dir, paris), use_cache)
    except PipelineError as exc:
        if manifest.failed_stage is None:
            manifest.stages.append(StageResult(exc.stage, "failed", error=exc.message))
        manifest.save()
        raise
    manifest.save()
    return manifest
