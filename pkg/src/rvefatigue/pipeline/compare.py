"""Paris constants of several RVE variants side by side."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..paris import ParisConstants
from .config import DEFECTED, PipelineConfig
from .run import PipelineError, run_pipeline

TABLE_COLUMNS = ("model", "material", "crack_type", "m", "C", "r2", "n_points", "status", "error")


def _num(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ""


@dataclass(frozen=True)
class ModelRow:
    model: str
    material: str
    crack_type: str
    constants: ParisConstants | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.constants is not None

    def as_list(self) -> list[str]:
        c = self.constants
        return [
            self.model,
            self.material,
            self.crack_type,
            _num(c.m) if c else "",
            _num(c.C) if c else "",
            _num(c.r2) if c else "",
            str(c.n_points) if c else "",
            "ok" if c else "failed",
            self.error or "",
        ]


def material_label(cfg: PipelineConfig) -> str:
    rve = cfg.md.rve
    return "pure Fe" if rve.c_fraction == 0 and rve.vacancy_fraction == 0 else "Fe-C with defects"


def model_variants(base: PipelineConfig) -> list[tuple[str, PipelineConfig]]:
    """Models A-D: pure blunt, pure sharp, defected blunt, defected sharp."""
    out = []
    names = iter("ABCD")
    for defects in ({"c_fraction": 0.0, "vacancy_fraction": 0.0}, DEFECTED):
        for kind in ("blunt", "sharp"):
            name = next(names)
            changes = {f"rve.{k}": v for k, v in defects.items()}
            changes["rve.crack_kind"] = kind
            changes["outdir"] = base.outdir / f"model_{name}"
            out.append((name, base.replace(**changes)))
    return out


def _micro(item: tuple[str, PipelineConfig, bool]) -> ModelRow:
    name, cfg, use_cache = item
    label = material_label(cfg)
    kind = cfg.md.rve.crack_kind
    try:
        run_pipeline(cfg, use_cache=use_cache, macro=False)
        const = ParisConstants.load(cfg.outdir / "paris_fit" / "paris.json")
    except PipelineError as exc:
        return ModelRow(name, label, kind, None, str(exc))
    except Exception as exc:  # a crashed variant must not sink the table
        return ModelRow(name, label, kind, None, f"{type(exc).__name__}: {exc}")
    return ModelRow(name, label, kind, const)


def compare_models(
    configs: Sequence[tuple[str, PipelineConfig]],
    outdir: str | Path | None = None,
    workers: int = 1,
    use_cache: bool = True,
) -> list[ModelRow]:
    """Run the micro half for every variant and tabulate (m, C, R^2).

    A variant that fails is reported in its row; the others still run.
    With ``workers > 1`` variants run in separate processes. The table is
    written to ``<outdir>/compare/constants.csv`` when ``outdir`` is given.
    """
    items = [(name, cfg, use_cache) for name, cfg in configs]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_micro, items))
    else:
        rows = [_micro(item) for item in items]
    if outdir is not None:
        write_table(rows, Path(outdir) / "compare" / "constants.csv")
    return rows


def write_table(rows: Sequence[ModelRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in rows:
            w.writerow(r.as_list())


def format_table(rows: Sequence[ModelRow]) -> str:
    lines = [f"{'model':<6}{'material':<20}{'crack':<7}{'m':>9}{'C':>13}{'R2':>8}  status"]
    for r in rows:
        c = r.constants
        if c is not None:
            r2 = f"{c.r2:8.3f}" if math.isfinite(c.r2) else f"{'':>8}"
            lines.append(f"{r.model:<6}{r.material:<20}{r.crack_type:<7}{c.m:9.4f}{c.C:13.4e}{r2}  ok")
        else:
            lines.append(f"{r.model:<6}{r.material:<20}{r.crack_type:<7}{'':>9}{'':>13}{'':>8}  failed: {r.error}")
    return "\n".join(lines)
