"""Per-atom virial stress and its von Mises equivalent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import pair_virial
from .potential import PairPotential
from .system import AtomSystem
from .units import EV_A3_TO_GPA, KINETIC

COMPONENTS = ("xx", "yy", "zz", "xy", "yz", "zx")


def von_mises(s: np.ndarray) -> np.ndarray:
    """Equivalent stress of rows (xx, yy, zz, xy, yz, zx)."""
    s = np.asarray(s, dtype=float)
    sx, sy, sz, txy, tyz, tzx = (s[..., k] for k in range(6))
    q = 0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2) + 3.0 * (txy**2 + tyz**2 + tzx**2)
    return np.sqrt(np.maximum(q, 0.0))


@dataclass
class VirialStressField:
    """Per-atom stress, tension positive.

    Attributes:
        components: (n, 6) rows xx, yy, zz, xy, yz, zx in eV/Angstrom^3.
        volume: (n,) per-atom volume in Angstrom^3.
    """

    components: np.ndarray
    volume: np.ndarray

    @property
    def von_mises(self) -> np.ndarray:
        return von_mises(self.components)

    @property
    def gpa(self) -> np.ndarray:
        return self.components * EV_A3_TO_GPA

    def tensor(self, i: int) -> np.ndarray:
        xx, yy, zz, xy, yz, zx = self.components[i]
        return np.array([[xx, xy, zx], [xy, yy, yz], [zx, yz, zz]])

    def component(self, name: str) -> np.ndarray:
        return self.components[:, COMPONENTS.index(name)]


def virial_stress(
    system: AtomSystem, potential: PairPotential, volume: float | np.ndarray | None = None
) -> VirialStressField:
    """sigma_i = [ (1/2) sum_j (r_j - r_i) (x) f_ij  -  m_i v_i (x) v_i ] / V_i.

    ``volume`` defaults to the BCC atomic volume a^3 / 2 of the lattice
    the system was built from.

    Raises:
        ValueError: a zero or negative atomic volume.
    """
    if volume is None:
        a = system.info.get("lattice", 2.85)
        volume = 0.5 * a**3
    vol = np.broadcast_to(np.asarray(volume, dtype=float), (system.n_atoms,)).copy()
    if np.any(vol <= 0):
        raise ValueError("atomic volume must be positive")
    _, _, w = pair_virial(system, potential)
    v = system.velocities
    m = system.masses * KINETIC
    kin = np.stack(
        [
            v[:, 0] * v[:, 0],
            v[:, 1] * v[:, 1],
            v[:, 2] * v[:, 2],
            v[:, 0] * v[:, 1],
            v[:, 1] * v[:, 2],
            v[:, 2] * v[:, 0],
        ],
        axis=1,
    ) * m[:, None]
    return VirialStressField((w - kin) / vol[:, None], vol)
