"""Forces, time integration and energy minimisation."""

from __future__ import annotations

import numpy as np

from .kernels import build_pairs, pair_forces, verlet_run
from .potential import PairPotential
from .system import FIXED_BOTTOM, FIXED_TOP, AtomSystem
from .units import ACCEL, KB, KINETIC

DEFAULT_SKIN = 0.5


class InstabilityError(RuntimeError):
    """Non-finite or overlapping state: the integration has blown up."""


class RelaxationError(RuntimeError):
    """Minimiser ran out of steps before reaching the force tolerance."""


def _displacement(a: np.ndarray, b: np.ndarray, system: AtomSystem) -> np.ndarray:
    d = a - b
    for k in range(3):
        if system.periodic[k]:
            L = system.box[k]
            d[:, k] -= L * np.rint(d[:, k] / L)
    return d


def neighbour_pairs(system: AtomSystem, potential: PairPotential, skin: float = DEFAULT_SKIN):
    """Cached half pair list, rebuilt once any atom moved more than skin/2."""
    if system._pairs is not None and system._ref is not None and len(system._ref) == system.n_atoms:
        moved = _displacement(system.positions, system._ref, system)
        if np.max(np.einsum("ij,ij->i", moved, moved), initial=0.0) <= (0.5 * skin) ** 2:
            return system._pairs
    periodic = np.array(system.periodic, dtype=np.bool_)
    system._pairs = build_pairs(
        system.positions, system.box, periodic, system.side, potential.max_cutoff + skin
    )
    system._ref = system.positions.copy()
    return system._pairs


def _evaluate(system: AtomSystem, potential: PairPotential, virial: bool, skin: float):
    if not np.all(np.isfinite(system.positions)):
        raise InstabilityError("non-finite atom positions")
    first, second = neighbour_pairs(system, potential, skin)
    t = potential.tables
    f, e, w, rmin = pair_forces(
        system.positions,
        system.box,
        np.array(system.periodic, dtype=np.bool_),
        system.elements,
        first,
        second,
        t["D"],
        t["alpha"],
        t["r0"],
        t["rc"],
        t["e_rc"],
        t["f_rc"],
        virial,
    )
    if rmin < potential.min_separation:
        raise InstabilityError(f"atoms overlap: separation {rmin:.3f} A")
    return f, e, w


def compute_forces(system: AtomSystem, potential: PairPotential, skin: float = DEFAULT_SKIN) -> np.ndarray:
    """Per-atom forces (eV/Angstrom), f_i = -dU/dr_i; caches them on the system."""
    f, _, _ = _evaluate(system, potential, False, skin)
    system.forces = f
    return f


def potential_energy(system: AtomSystem, potential: PairPotential, skin: float = DEFAULT_SKIN) -> float:
    return float(_evaluate(system, potential, False, skin)[1])


def pair_virial(system: AtomSystem, potential: PairPotential, skin: float = DEFAULT_SKIN):
    """(forces, energy, per-atom pair virial rows xx, yy, zz, xy, yz, zx)."""
    return _evaluate(system, potential, True, skin)


def kinetic_energy(system: AtomSystem, mask: np.ndarray | None = None) -> float:
    m = system.masses
    v2 = np.einsum("ij,ij->i", system.velocities, system.velocities)
    if mask is not None:
        return float(0.5 * KINETIC * np.sum(m[mask] * v2[mask]))
    return float(0.5 * KINETIC * np.sum(m * v2))


def temperature(system: AtomSystem) -> float:
    mob = system.mobile
    dof = max(3 * int(mob.sum()) - 3, 1)
    return 2.0 * kinetic_energy(system, mob) / (dof * KB)


def total_energy(system: AtomSystem, potential: PairPotential) -> float:
    return potential_energy(system, potential) + kinetic_energy(system)


def run_verlet(
    system: AtomSystem,
    potential: PairPotential,
    dt: float,
    strains: np.ndarray,
    skin: float = DEFAULT_SKIN,
) -> AtomSystem:
    """Velocity-Verlet steps in place, one per entry of ``strains``.

    Mobile atoms follow Newton's equations. At the end of step k the fixed
    slabs sit at their anchors displaced by +/- strains[k] * L_y / 2 along
    y, with velocity equal to that displacement over dt.

    Raises:
        InstabilityError: non-finite state or overlapping atoms.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    strains = np.ascontiguousarray(strains, dtype=float)
    if len(strains) == 0:
        return system
    if system.forces is None:
        compute_forces(system, potential, skin)
    first, second = neighbour_pairs(system, potential, skin)
    t = potential.tables
    direction = np.where(system.group == FIXED_TOP, 1.0, np.where(system.group == FIXED_BOTTOM, -1.0, 0.0))
    first, second, ref, status = verlet_run(
        system.positions,
        system.velocities,
        system.forces,
        ACCEL / system.masses,
        system.mobile,
        system.anchors,
        direction,
        float(system.box[1]),
        strains,
        float(dt),
        system.box,
        np.array(system.periodic, dtype=np.bool_),
        system.side,
        system.elements,
        first,
        second,
        system._ref,
        potential.max_cutoff + skin,
        skin,
        t["D"],
        t["alpha"],
        t["r0"],
        t["rc"],
        t["e_rc"],
        t["f_rc"],
        potential.min_separation,
    )
    system._pairs, system._ref = (first, second), ref
    if status:
        system.invalidate()
        raise InstabilityError(
            "atoms overlap" if status == 1 else "non-finite state after step; reduce the time step"
        )
    system.time += dt * len(strains)
    if system.fixed.any():
        system.strain = float(strains[-1])
    return system


def step_velocity_verlet(
    system: AtomSystem,
    potential: PairPotential,
    dt: float,
    strain: float | None = None,
    skin: float = DEFAULT_SKIN,
) -> AtomSystem:
    """Advance one velocity-Verlet step in place and return the system.

    Fixed atoms move to the positions prescribed by ``strain`` (the
    current strain when None).
    """
    target = system.strain if strain is None else float(strain)
    return run_verlet(system, potential, dt, np.array([target]), skin)


def maxwell_velocities(system: AtomSystem, temperature_k: float, seed: int) -> AtomSystem:
    """Seeded Maxwell-Boltzmann velocities on mobile atoms, zero net momentum."""
    rng = np.random.default_rng(seed)
    mob = system.mobile
    system.velocities[:] = 0.0
    if temperature_k <= 0 or not mob.any():
        return system
    m = system.masses[mob][:, None]
    v = rng.standard_normal((int(mob.sum()), 3)) * np.sqrt(KB * temperature_k * ACCEL / m)
    v -= np.sum(m * v, axis=0) / np.sum(m)
    system.velocities[mob] = v
    t_now = temperature(system)
    if t_now > 0:
        system.velocities[mob] *= np.sqrt(temperature_k / t_now)
    return system


def relax(
    system: AtomSystem,
    potential: PairPotential,
    tolerance: float = 1e-3,
    max_steps: int = 20000,
    dt: float = 0.002,
    dt_max: float = 0.01,
    skin: float = DEFAULT_SKIN,
) -> AtomSystem:
    """FIRE minimisation of the mobile atoms, in place.

    Velocities are mixed towards the force direction while the power F.v
    stays positive and quenched to zero as soon as it turns negative.
    The number of steps taken is stored in ``system.info["relax_steps"]``.

    Raises:
        RelaxationError: max per-atom force still above ``tolerance``
            after ``max_steps``.
    """
    n_min, f_inc, f_dec, a_start, f_a = 5, 1.1, 0.5, 0.1, 0.99
    mob = system.mobile
    inv_m = ACCEL / system.masses[mob][:, None]
    v = np.zeros((int(mob.sum()), 3))
    a, n_pos = a_start, 0
    f = compute_forces(system, potential, skin)[mob]
    for it in range(max_steps + 1):
        fmax = float(np.sqrt(np.max(np.einsum("ij,ij->i", f, f), initial=0.0)))
        if fmax <= tolerance:
            system.velocities[:] = 0.0
            system.info["relax_steps"] = it
            return system
        if it == max_steps:
            break
        power = float(np.sum(f * v))
        if power > 0:
            vn = np.linalg.norm(v)
            fn = np.linalg.norm(f)
            v = (1 - a) * v + a * vn * f / fn
            if n_pos > n_min:
                dt = min(dt * f_inc, dt_max)
                a *= f_a
            n_pos += 1
        else:
            v[:] = 0.0
            dt *= f_dec
            a = a_start
            n_pos = 0
        v += dt * f * inv_m
        system.positions[mob] += dt * v
        system.wrap()
        f = compute_forces(system, potential, skin)[mob]
    raise RelaxationError(f"max force {fmax:.3e} eV/A above {tolerance} after {max_steps} steps")
