"""File formats for the macro solver: model files, life curve, crack path, VTK."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .fatigue import FatigueHistory
from .model import MacroModel
from .solver import Solution

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ""


def load_model(path: str | Path) -> MacroModel:
    """Read a plate model from TOML; keys may sit at top level or under [macro]."""
    data = tomllib.loads(Path(path).read_text())
    data = data.get("macro", data)
    return MacroModel.from_dict({k: v for k, v in data.items() if not isinstance(v, dict)})


def _seed_line(fh, seed: int | None) -> None:
    if seed is not None:
        fh.write(f"# seed={int(seed)}\n")


def _rows(fh):
    return (line for line in fh if not line.startswith("#"))


def write_life_curve(history: FatigueHistory, path: str | Path, seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _seed_line(fh, seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "N", "a_mm", "dK", "K_I", "K_II", "theta_deg"])
        for r in history.records:
            w.writerow(
                [r.step, _fmt(r.N), _fmt(r.a), _fmt(r.dK), _fmt(r.K_I), _fmt(r.K_II),
                 _fmt(math.degrees(r.theta))]
            )


def read_life_curve(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(_rows(fh)))
    out = {}
    for key in rows[0]:
        out[key] = np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])
    return out


def write_crack_path(vertices: np.ndarray, path: str | Path, seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _seed_line(fh, seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_mm", "y_mm"])
        for x, y in vertices:
            w.writerow([_fmt(x), _fmt(y)])


def write_vtk(solution: Solution, path: str | Path, title: str = "xfem field") -> None:
    """Legacy ASCII VTK unstructured grid: nodal displacement, cell von Mises."""
    mesh = solution.emesh.mesh
    u = solution.nodal_displacement()
    vm = solution.von_mises()
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines.extend(f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.nodes)
    ne = mesh.n_elements
    lines.append(f"CELLS {ne} {5 * ne}")
    lines.extend("4 " + " ".join(str(n) for n in conn) for conn in mesh.elements)
    lines.append(f"CELL_TYPES {ne}")
    lines.extend(["9"] * ne)
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines.append("VECTORS displacement double")
    lines.extend(f"{float(ux)!r} {float(uy)!r} 0.0" for ux, uy in u)
    lines.append(f"CELL_DATA {ne}")
    lines.append("SCALARS von_mises double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(repr(float(v)) for v in vm)
    Path(path).write_text("\n".join(lines) + "\n")
