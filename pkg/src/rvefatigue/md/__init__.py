"""Toy-scale molecular dynamics of a cracked BCC iron plate under cyclic strain."""

from .config import ConfigError, MDConfig, RVEConfig, load_md_config
from .dynamics import (
    InstabilityError,
    RelaxationError,
    compute_forces,
    maxwell_velocities,
    potential_energy,
    relax,
    run_verlet,
    total_energy,
)
from .io import read_cycle_records, read_lammps_dump, read_xyz, write_cycle_records, write_xyz
from .loading import CycleRecord, LoadProgram, records_to_samples, run_cyclic_loading
from .potential import PairPotential
from .stress import VirialStressField, virial_stress, von_mises
from .system import AtomSystem, CrackSpec, build_rve

__all__ = [
    "AtomSystem",
    "ConfigError",
    "CrackSpec",
    "CycleRecord",
    "InstabilityError",
    "LoadProgram",
    "MDConfig",
    "PairPotential",
    "RVEConfig",
    "RelaxationError",
    "VirialStressField",
    "build_rve",
    "compute_forces",
    "load_md_config",
    "maxwell_velocities",
    "potential_energy",
    "read_cycle_records",
    "read_lammps_dump",
    "read_xyz",
    "records_to_samples",
    "relax",
    "run_cyclic_loading",
    "run_verlet",
    "total_energy",
    "virial_stress",
    "von_mises",
    "write_cycle_records",
    "write_xyz",
]
