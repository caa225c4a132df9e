"""Snapshot, dump and cycle-record files for the MD stage."""

from __future__ import annotations

import csv
import math
import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .loading import CycleRecord
from .potential import SPECIES_NAMES
from .system import AtomSystem

RECORD_COLUMNS = (
    "cycle",
    "peak_strain",
    "sigma_y_tip_GPa",
    "crack_len_A",
    "min_strain",
    "sigma_y_min_GPa",
    "crack_len_raw_A",
    "tip_x_A",
    "tip_y_A",
)


def _num(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else "nan"


def write_xyz(
    system: AtomSystem,
    path: str | Path,
    von_mises_gpa: np.ndarray | None = None,
    comment: dict | None = None,
) -> None:
    """Extended XYZ frame with columns species, x, y, z, von Mises stress (GPa).

    The header line carries the box as a ``Lattice`` matrix, ``pbc`` flags,
    the applied strain, the time and any extra ``comment`` entries.
    """
    vm = np.zeros(system.n_atoms) if von_mises_gpa is None else np.asarray(von_mises_gpa, dtype=float)
    if vm.shape != (system.n_atoms,):
        raise ValueError("one von Mises value per atom expected")
    lx, ly, lz = system.box
    fields = {
        "Lattice": f"{float(lx)!r} 0 0 0 {float(ly)!r} 0 0 0 {float(lz)!r}",
        "Properties": "species:S:1:pos:R:3:von_mises:R:1",
        "pbc": " ".join("T" if p else "F" for p in system.periodic),
        "strain": repr(float(system.strain)),
        "time_ps": repr(float(system.time)),
    }
    for k, v in (comment or {}).items():
        fields[str(k)] = str(v)
    header = " ".join(f'{k}="{v}"' if " " in v else f"{k}={v}" for k, v in fields.items())
    names = np.array(SPECIES_NAMES)[system.species]
    with open(path, "w") as fh:
        fh.write(f"{system.n_atoms}\n{header}\n")
        for name, (x, y, z), s in zip(names, system.positions, vm):
            fh.write(f"{name} {float(x)!r} {float(y)!r} {float(z)!r} {float(s)!r}\n")


def read_xyz(path: str | Path) -> tuple[AtomSystem, np.ndarray]:
    """Read a frame written by :func:`write_xyz`; returns (system, von Mises GPa).

    Raises:
        ValueError: malformed header, unknown species or a short file.
    """
    with open(path) as fh:
        try:
            n = int(fh.readline())
        except ValueError as exc:
            raise ValueError(f"{path}: first line must hold the atom count") from exc
        meta = {}
        for token in shlex.split(fh.readline()):
            key, _, value = token.partition("=")
            meta[key] = value
        rows = [fh.readline().split() for _ in range(n)]
    if any(len(r) < 4 for r in rows):
        raise ValueError(f"{path}: expected {n} atom lines")
    lookup = {name: k for k, name in enumerate(SPECIES_NAMES)}
    try:
        species = np.array([lookup[r[0]] for r in rows], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"{path}: unknown species {exc.args[0]!r}") from None
    pos = np.array([[float(v) for v in r[1:4]] for r in rows]).reshape(n, 3)
    vm = np.array([float(r[4]) if len(r) > 4 else 0.0 for r in rows])
    if "Lattice" not in meta:
        raise ValueError(f"{path}: missing Lattice entry")
    lat = np.array([float(v) for v in meta["Lattice"].split()]).reshape(3, 3)
    pbc = tuple(v == "T" for v in meta.get("pbc", "F F T").split())
    system = AtomSystem(pos, None, species, np.diag(lat).copy(), pbc)
    system.strain = float(meta.get("strain", 0.0))
    system.time = float(meta.get("time_ps", 0.0))
    return system, vm


@dataclass
class DumpFrame:
    """One timestep of a LAMMPS text dump.

    Attributes:
        timestep: integer step stamp.
        lo: (3,) lower box bounds.
        hi: (3,) upper box bounds.
        periodic: per-axis flags from the ``pp``/``ff`` tags.
        ids: atom ids, sorted ascending.
        types: atom types in id order.
        positions: (n, 3) coordinates shifted so the box starts at zero.
    """

    timestep: int
    lo: np.ndarray
    hi: np.ndarray
    periodic: tuple[bool, bool, bool]
    ids: np.ndarray
    types: np.ndarray
    positions: np.ndarray

    @property
    def box(self) -> np.ndarray:
        return self.hi - self.lo


def iter_lammps_dump(path: str | Path) -> Iterator[DumpFrame]:
    """Yield frames of a text dump with at least the columns id, type, x, y, z.

    Scaled coordinates (xs, ys, zs) are accepted too. Frames are read one
    at a time so only the current one is held in memory.

    Raises:
        ValueError: a frame lacks a required column or is truncated.
    """
    with open(path) as fh:
        while True:
            line = fh.readline()
            if not line:
                return
            if not line.startswith("ITEM: TIMESTEP"):
                continue
            step = int(fh.readline())
            fh.readline()  # ITEM: NUMBER OF ATOMS
            n = int(fh.readline())
            bounds = fh.readline().split()
            flags = bounds[3:6] if len(bounds) >= 6 else ["pp", "pp", "pp"]
            lims = np.array([[float(v) for v in fh.readline().split()[:2]] for _ in range(3)])
            cols = fh.readline().split()[2:]
            rows = [fh.readline().split() for _ in range(n)]
            if any(len(r) < len(cols) for r in rows):
                raise ValueError(f"{path}: truncated frame at step {step}")
            data = np.array(rows, dtype=float).reshape(n, len(cols))
            idx = {c: k for k, c in enumerate(cols)}
            lo, hi = lims[:, 0], lims[:, 1]
            if all(c in idx for c in ("x", "y", "z")):
                pos = data[:, [idx["x"], idx["y"], idx["z"]]] - lo
            elif all(c in idx for c in ("xs", "ys", "zs")):
                pos = data[:, [idx["xs"], idx["ys"], idx["zs"]]] * (hi - lo)
            else:
                raise ValueError(f"{path}: dump needs x y z (or xs ys zs) columns")
            for c in ("id", "type"):
                if c not in idx:
                    raise ValueError(f"{path}: dump needs an {c} column")
            ids = data[:, idx["id"]].astype(np.int64)
            order = np.argsort(ids, kind="stable")
            yield DumpFrame(
                step,
                lo,
                hi,
                tuple(f.startswith("p") for f in flags),
                ids[order],
                data[order, idx["type"]].astype(np.int64),
                pos[order],
            )


def read_lammps_dump(path: str | Path) -> DumpFrame:
    """First frame of a text dump."""
    for frame in iter_lammps_dump(path):
        return frame
    raise ValueError(f"{path}: no frames found")


def write_cycle_records(records: Sequence[CycleRecord], path: str | Path, seed: int | None = None) -> None:
    """CSV of emitted cycles; a leading ``# seed=`` comment records provenance."""
    with open(path, "w", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={int(seed)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(
                [
                    r.cycle,
                    _num(r.peak_strain),
                    _num(r.sigma_y_max_GPa),
                    _num(r.crack_len_A),
                    _num(r.min_strain),
                    _num(r.sigma_y_min_GPa),
                    _num(r.crack_len_raw_A),
                    _num(r.tip_x_A),
                    _num(r.tip_y_A),
                ]
            )


def read_cycle_records(path: str | Path) -> list[CycleRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    out = []
    for r in rows:
        length = float(r["crack_len_A"])
        out.append(
            CycleRecord(
                int(r["cycle"]),
                float(r["peak_strain"]),
                float(r.get("min_strain") or "nan"),
                float(r["sigma_y_tip_GPa"]),
                float(r.get("sigma_y_min_GPa") or "nan"),
                length,
                float(r.get("tip_x_A") or "nan"),
                float(r.get("tip_y_A") or "nan"),
                crack_len_raw_A=float(r.get("crack_len_raw_A") or length),
            )
        )
    return out
