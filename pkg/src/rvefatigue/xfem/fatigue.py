"""Fatigue crack propagation: kink direction, Paris increments and the life loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..paris import ParisConstants
from .crack import CrackPolyline
from .enrichment import EnrichedMesh, enrich
from .mesh import StructuredMesh
from .model import MacroModel
from .sif import compute_sifs
from .solver import Solution, assemble_solve

DEFAULT_SNAPSHOTS = (10_000, 40_000, 55_000, 63_000)
# K in MPa*sqrt(mm), crack length in mm
MACRO_UNITS = "mpa_sqrt_mm"


def kink_angle(k1: float, k2: float) -> float:
    """Propagation angle (radians, tip frame) from the maximum hoop stress criterion.

    Positive K_II turns the crack towards negative angles. Evaluated in the
    rationalised form 2*atan(-2 K_II / (K_I + sqrt(K_I^2 + 8 K_II^2))), which
    is algebraically identical and has no division by K_II.
    """
    if k1 == 0 and k2 == 0:
        raise ValueError("kink angle undefined when both stress intensity factors vanish")
    if k2 == 0:
        return 0.0
    root = math.sqrt(k1 * k1 + 8 * k2 * k2)
    return 2.0 * math.atan(-2.0 * k2 / (k1 + root))


def hoop_stress(theta, k1: float, k2: float, r: float = 1.0):
    """Near-tip circumferential stress at polar angle ``theta``."""
    c = np.cos(theta / 2)
    return c / np.sqrt(2 * np.pi * r) * (k1 * c**2 - 1.5 * k2 * np.sin(theta))


@dataclass
class StepRecord:
    step: int
    a: float
    N: float
    dK: float
    K_I: float
    K_II: float
    theta: float
    tip_x: float
    tip_y: float
    dN: float


@dataclass
class FatigueHistory:
    records: list[StepRecord] = field(default_factory=list)
    fractured: bool = False
    cause: str = ""

    @property
    def N(self) -> np.ndarray:
        return np.array([r.N for r in self.records])

    @property
    def a(self) -> np.ndarray:
        return np.array([r.a for r in self.records])

    @property
    def cycles(self) -> float:
        return self.records[-1].N if self.records else 0.0


@dataclass(frozen=True)
class StopCriteria:
    """When a run ends.

    A tip within ``boundary_margin`` element sizes of the plate edge, or
    K_max reaching the model toughness, counts as fracture. Exhausting
    ``max_steps`` or ``max_cycles`` ends the run without fracture.
    """

    boundary_margin: float = 2.0
    max_steps: int = 500
    max_cycles: float | None = None


@dataclass
class FieldSnapshot:
    cycle: float
    step: int
    solution: Solution


def _boundary_distance(p: np.ndarray, model: MacroModel) -> float:
    return float(min(p[0], p[1], model.length - p[0], model.height - p[1]))


def fatigue_step(
    history: FatigueHistory,
    emesh: EnrichedMesh,
    model: MacroModel,
    constants: ParisConstants,
    da: float,
    solution: Solution | None = None,
    radius_factor: float = 2.5,
) -> tuple[FatigueHistory, CrackPolyline]:
    """Advance the crack by one fixed increment and append the cycle count.

    The tip with the largest range dK advances ``da``; any other tip advances
    da * (dK_i / dK_max)^m so that all tips share the same cycle increment
    dN = da / (C dK_max^m). Constants declared in another unit system are
    converted to MPa*sqrt(mm) and mm first.
    """
    if history.fractured:
        raise RuntimeError("crack has already fractured the plate")
    if da <= 0:
        raise ValueError("crack increment must be positive")
    if constants.units != MACRO_UNITS:
        constants = constants.convert(MACRO_UNITS)
    sol = solution if solution is not None else assemble_solve(emesh, model)
    crack = emesh.crack
    h = emesh.mesh.h
    per_tip = {}
    for tip in crack.tips:
        room = _boundary_distance(crack.tip(tip), model) / h
        # keep the ring clear of the plate edge and of the other tip's ring
        for other in crack.tips:
            if other != tip:
                room = min(room, 0.5 * np.hypot(*(crack.tip(other) - crack.tip(tip))) / h)
        rf = min(radius_factor, 0.98 * room)
        k1, k2 = compute_sifs(sol, tip, rf)
        dk = (1.0 - model.load_ratio) * k1
        per_tip[tip] = (k1, k2, dk)
    lead = max(per_tip, key=lambda t: per_tip[t][2])
    k1, k2, dk = per_tip[lead]
    if not dk > 0:
        raise ValueError(f"non-positive stress intensity range dK={dk}")
    dn = da / (constants.C * dk**constants.m)
    if not math.isfinite(dn) or dn <= 0:
        raise ValueError(f"cycle increment is not finite and positive: {dn}")
    new = crack.copy()
    theta = 0.0
    for tip, (t1, t2, tdk) in per_tip.items():
        th = kink_angle(t1, t2)
        step = da if tip == lead else da * (max(tdk, 0.0) / dk) ** constants.m
        if step > 0:
            new.extend(tip, step, th)
        if tip == lead:
            theta = th
    prev_n = history.records[-1].N if history.records else 0.0
    tip_pos = new.tip(lead)
    history.records.append(
        StepRecord(
            step=len(history.records),
            a=new.length,
            N=prev_n + dn,
            dK=dk,
            K_I=k1,
            K_II=k2,
            theta=theta,
            tip_x=float(tip_pos[0]),
            tip_y=float(tip_pos[1]),
            dN=dn,
        )
    )
    return history, new


def initial_crack(model: MacroModel) -> CrackPolyline:
    tips = ("end",) if model.crack_position == "edge" else ("start", "end")
    return CrackPolyline(model.crack_vertices(), tips)


def run_fatigue(
    model: MacroModel,
    constants: ParisConstants,
    da: float = 1.0,
    stop: StopCriteria = StopCriteria(),
    element_size: float = 1.0,
    snapshots: tuple[float, ...] = DEFAULT_SNAPSHOTS,
    radius_factor: float = 2.5,
    tip_radius: float | None = None,
) -> tuple[FatigueHistory, list[FieldSnapshot], CrackPolyline]:
    """Propagate the crack until fracture or a budget is exhausted.

    Loops enrich -> solve -> SIFs -> kink angle -> increment. Returns the
    history, the field states at the requested cycle counts and the final
    crack path. The first history record holds the initial crack at N = 0.
    """
    mesh = StructuredMesh.with_element_size(model.length, model.height, element_size)
    crack = initial_crack(model)
    history = FatigueHistory()
    history.records.append(
        StepRecord(0, crack.length, 0.0, float("nan"), float("nan"), float("nan"), 0.0,
                   *map(float, crack.tip(crack.tips[-1])), 0.0)
    )
    pending = sorted(snapshots)
    taken: list[FieldSnapshot] = []
    for _ in range(stop.max_steps):
        margin = stop.boundary_margin * mesh.h
        if any(_boundary_distance(crack.tip(t), model) <= margin for t in crack.tips):
            history.fractured, history.cause = True, "boundary"
            break
        emesh = enrich(mesh, crack.copy(), tip_radius=tip_radius)
        sol = assemble_solve(emesh, model)
        n_before = history.cycles
        history, new_crack = fatigue_step(history, emesh, model, constants, da, sol, radius_factor)
        rec = history.records[-1]
        while pending and pending[0] < rec.N:
            if pending[0] >= n_before:
                taken.append(FieldSnapshot(pending[0], rec.step - 1, sol))
            pending.pop(0)
        if model.toughness is not None and rec.K_I >= model.toughness:
            history.fractured, history.cause = True, "toughness"
            crack = new_crack
            break
        if new_crack.is_self_intersecting():
            raise ValueError("crack path became self-intersecting")
        crack = new_crack
        if stop.max_cycles is not None and rec.N >= stop.max_cycles:
            history.cause = "max_cycles"
            break
    else:
        history.cause = "max_steps"
    return history, taken, crack
