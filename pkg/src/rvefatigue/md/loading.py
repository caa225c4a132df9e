"""Strain-controlled cyclic loading of the plate with per-cycle crack sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..paris import CycleSample
from ..vision.extract import Extraction, ExtractionSettings, extract_crack
from ..vision.raster import ContourRaster
from .dynamics import run_verlet
from .potential import PairPotential
from .stress import virial_stress
from .system import AtomSystem
from .units import EV_A3_TO_GPA, PER_SECOND


@dataclass(frozen=True)
class LoadProgram:
    """Triangle-wave strain history with rising peaks.

    Cycle k (1-based) ramps to eps_max_k = peak_start + (k - 1) * peak_increment
    and unloads to load_ratio * eps_max_k, both at ``strain_rate``. The
    very first ramp starts from zero strain.

    Attributes:
        strain_rate: 1/s.
        load_ratio: eps_min / eps_max in every cycle.
        peak_start: first peak strain.
        peak_increment: growth of the peak per cycle (>= 0).
        cycles: number of cycles.
        dt: time step in ps.
    """

    strain_rate: float = 1e9
    load_ratio: float = 0.5
    peak_start: float = 0.02
    peak_increment: float = 0.002
    cycles: int = 10
    dt: float = 0.001

    def __post_init__(self):
        if not self.strain_rate > 0:
            raise ValueError("strain rate must be positive")
        if not 0.0 <= self.load_ratio < 1.0:
            raise ValueError("load ratio must lie in [0, 1)")
        if self.peak_start < 0 or self.peak_increment < 0:
            raise ValueError("peak strains must be non-negative and non-decreasing")
        if self.cycles < 1:
            raise ValueError("need at least one cycle")
        if not self.dt > 0:
            raise ValueError("time step must be positive")

    def peak(self, k: int) -> float:
        return self.peak_start + (k - 1) * self.peak_increment

    def trough(self, k: int) -> float:
        return self.load_ratio * self.peak(k)

    @property
    def peaks(self) -> np.ndarray:
        return np.array([self.peak(k) for k in range(1, self.cycles + 1)])

    @property
    def rate_per_step(self) -> float:
        return self.strain_rate * PER_SECOND * self.dt

    def ramp(self, start: float, end: float) -> np.ndarray:
        """Strain after each step of a ramp; the last entry is exactly ``end``."""
        n = max(1, math.ceil(abs(end - start) / self.rate_per_step - 1e-9))
        if end == start:
            return np.full(1, end)
        out = start + (end - start) * np.arange(1, n + 1) / n
        out[-1] = end
        return out

    def total_steps(self) -> int:
        steps, prev = 0, 0.0
        for k in range(1, self.cycles + 1):
            steps += len(self.ramp(prev, self.peak(k))) + len(self.ramp(self.peak(k), self.trough(k)))
            prev = self.trough(k)
        return steps

    def to_dict(self) -> dict:
        return {
            "strain_rate": self.strain_rate,
            "load_ratio": self.load_ratio,
            "peak_start": self.peak_start,
            "peak_increment": self.peak_increment,
            "cycles": self.cycles,
            "dt": self.dt,
        }


@dataclass
class CycleRecord:
    """What one emitted cycle produced.

    Stresses are means of sigma_yy over mobile bulk atoms in the half disc
    ahead of the crack front, at peak and at minimum strain. The tip
    columns hold the crack front position. ``crack_len_A`` is the largest
    length extracted so far: faces that touch again at a later peak lose
    their surface signature, but the crack has not healed.
    ``crack_len_raw_A`` is the length seen in this cycle's snapshot.
    """

    cycle: int
    peak_strain: float
    min_strain: float
    sigma_y_max_GPa: float
    sigma_y_min_GPa: float
    crack_len_A: float
    tip_x_A: float
    tip_y_A: float
    crack_len_raw_A: float = float("nan")
    raster: ContourRaster | None = field(default=None, repr=False, compare=False)

    def sample(self) -> CycleSample:
        return CycleSample(
            float(self.cycle), self.crack_len_A, self.sigma_y_max_GPa,
            min(self.sigma_y_min_GPa, self.sigma_y_max_GPa),
        )


def boundary_exclusion(system: AtomSystem, margin: float) -> np.ndarray:
    """Fixed slabs plus atoms within ``margin`` of the open x faces."""
    x = system.positions[:, 0]
    return system.fixed | (x < margin) | (x > system.box[0] - margin)


def tip_region(system: AtomSystem, tip, radius: float, surface: np.ndarray) -> np.ndarray:
    """Mobile bulk atoms in the half disc of ``radius`` ahead of the tip."""
    d = system.positions[:, :2] - np.asarray(tip)
    inside = (d[:, 0] >= 0) & (np.hypot(d[:, 0], d[:, 1]) <= radius)
    return inside & system.mobile & ~surface


def _extract(system: AtomSystem, settings: ExtractionSettings, margin: float) -> Extraction:
    y = system.positions[:, 1]
    pad = settings.lattice_constant
    extent = (0.0, float(y.min() - pad), float(system.box[0]), float(y.max() + pad))
    return extract_crack(
        system.positions,
        system.box,
        system.periodic,
        boundary_exclusion(system, margin),
        settings,
        extent,
    )


def ramp_with_average(
    system: AtomSystem, potential: PairPotential, program: "LoadProgram", strains: np.ndarray, n_avg: int
) -> np.ndarray:
    """Run a strain ramp and return per-atom sigma_yy (GPa) averaged over its last steps."""
    n_avg = max(1, min(n_avg, len(strains)))
    run_verlet(system, potential, program.dt, strains[:-n_avg])
    acc = np.zeros(system.n_atoms)
    for k in range(len(strains) - n_avg, len(strains)):
        run_verlet(system, potential, program.dt, strains[k : k + 1])
        acc += virial_stress(system, potential).components[:, 1]
    return acc * (EV_A3_TO_GPA / n_avg)


def region_mean(values: np.ndarray, region: np.ndarray) -> float:
    return float(np.mean(values[region])) if region.any() else float("nan")


def run_cyclic_loading(
    system: AtomSystem,
    potential: PairPotential,
    program: LoadProgram,
    emit_every: int = 1,
    settings: ExtractionSettings = ExtractionSettings(),
    sample_radius: float = 10.0,
    boundary_margin: float | None = None,
    keep_rasters: bool = True,
    average_steps: int = 100,
    on_emit: Callable[[CycleRecord, AtomSystem], None] | None = None,
) -> list[CycleRecord]:
    """Cycle the fixed slabs and record crack length and tip stress.

    The system is advanced in place with velocity Verlet. After every
    ``emit_every``-th cycle's loading ramp the crack is extracted from the
    snapshot. sigma_y is the mean over atoms ahead of its tip of the
    per-atom virial sigma_yy, time-averaged over the last ``average_steps``
    steps of the loading ramp (peak) and of the unloading ramp (minimum).

    Raises:
        InstabilityError: the dynamics blew up.
        ValueError: crack extraction failed on an emitted snapshot.
    """
    if emit_every < 1:
        raise ValueError("emit_every must be a positive cycle count")
    margin = 2 * settings.lattice_constant if boundary_margin is None else boundary_margin
    records: list[CycleRecord] = []
    prev = system.strain
    longest = 0.0
    for k in range(1, program.cycles + 1):
        peak, trough = program.peak(k), program.trough(k)
        emit = k % emit_every == 0
        up, down = program.ramp(prev, peak), program.ramp(peak, trough)
        if emit:
            syy_max = ramp_with_average(system, potential, program, up, average_steps)
            ex = _extract(system, settings, margin)
            region = tip_region(system, ex.front, sample_radius, ex.surface)
            syy_min = ramp_with_average(system, potential, program, down, average_steps)
            longest = max(longest, ex.length)
            rec = CycleRecord(
                k, peak, trough, region_mean(syy_max, region), region_mean(syy_min, region),
                longest, ex.front[0], ex.front[1], ex.length, ex.raster if keep_rasters else None,
            )
            records.append(rec)
            if on_emit is not None:
                on_emit(rec, system)
        else:
            run_verlet(system, potential, program.dt, up)
            run_verlet(system, potential, program.dt, down)
        prev = trough
    return records


def records_to_samples(records: list[CycleRecord]) -> list[CycleSample]:
    return [r.sample() for r in records if math.isfinite(r.sigma_y_max_GPa) and r.crack_len_A > 0]
