"""Shifted-force Morse pair potential for Fe with a scaled carbon species."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

# species codes used throughout the MD package
FE, C_SUB, C_INT = 0, 1, 2
SPECIES_NAMES = ("Fe", "C_sub", "C_int")
# chemical element of each species: 0 = Fe, 1 = C
ELEMENT = np.array([0, 1, 1], dtype=np.int64)

# Girifalco-Weizer Morse constants for iron
FE_DEPTH = 0.4174  # eV
FE_ALPHA = 1.3885  # 1/Angstrom


def _morse(r, D, a, r0):
    x = np.exp(-a * (r - r0))
    return D * (x * x - 2 * x), -2 * a * D * (x * x - x)


def bcc_shells(lattice: float, rc: float) -> tuple[np.ndarray, np.ndarray]:
    """Distances and multiplicities of BCC neighbour shells inside ``rc``."""
    n = int(math.ceil(rc / lattice)) + 1
    g = np.arange(-2 * n, 2 * n + 1)
    i, j, k = np.meshgrid(g, g, g, indexing="ij")
    # BCC sites in units of a/2: all-even or all-odd integer triples
    same = ((i % 2 == 0) & (j % 2 == 0) & (k % 2 == 0)) | ((i % 2 == 1) & (j % 2 == 1) & (k % 2 == 1))
    r = 0.5 * lattice * np.sqrt(i**2 + j**2 + k**2)[same]
    r = r[(r > 0) & (r < rc)]
    d, counts = np.unique(np.round(r, 9), return_counts=True)
    return d, counts


def equilibrium_spacing_for(lattice: float, depth: float, alpha: float, rc: float) -> float:
    """Morse r0 that makes a BCC crystal of ``lattice`` stress-free under the shifted force."""

    def pressure(r0):
        d, n = bcc_shells(lattice, rc)
        _, du_c = _morse(rc, depth, alpha, r0)
        _, du = _morse(d, depth, alpha, r0)
        return float(np.sum(n * d * (du - du_c)))

    return brentq(pressure, 0.6 * lattice, 1.2 * lattice, xtol=1e-14)


@dataclass(frozen=True)
class PairPotential:
    """Morse pair interaction shifted so energy and force both vanish at the cutoff.

    Fe-Fe uses (depth, alpha, r0, r_cut). Pairs involving carbon scale the
    depth by ``carbon_depth_factor`` and r0 and the cutoff by
    ``carbon_radius_factor`` per carbon atom in the pair.

    Attributes:
        depth: well depth D (eV).
        alpha: Morse stiffness (1/Angstrom).
        r0: pair equilibrium spacing (Angstrom).
        r_cut: Fe-Fe cutoff (Angstrom).
        carbon_depth_factor: D multiplier per carbon partner.
        carbon_radius_factor: r0 and cutoff multiplier per carbon partner.
        min_separation: closer pairs mean a corrupted state (Angstrom).
        form: identifier of the functional form.
    """

    depth: float = FE_DEPTH
    alpha: float = FE_ALPHA
    r0: float = field(default=float("nan"))
    r_cut: float = 4.0
    carbon_depth_factor: float = 1.5
    carbon_radius_factor: float = 0.75
    min_separation: float = 0.5
    form: str = "morse_shifted_force"

    def __post_init__(self):
        if not (self.depth > 0 and self.alpha > 0 and self.r_cut > 0):
            raise ValueError("depth, alpha and r_cut must be positive")
        if math.isnan(self.r0):
            object.__setattr__(
                self, "r0", equilibrium_spacing_for(2.85, self.depth, self.alpha, self.r_cut)
            )
        if not 0 < self.r0 < self.r_cut:
            raise ValueError("r0 must lie inside the cutoff")

    @classmethod
    def for_lattice(cls, lattice: float = 2.85, **kw) -> "PairPotential":
        """Fe potential whose zero-pressure BCC lattice constant is ``lattice``."""
        p = cls(**kw)
        return replace(p, r0=equilibrium_spacing_for(lattice, p.depth, p.alpha, p.r_cut))

    @cached_property
    def tables(self) -> dict[str, np.ndarray]:
        """(2, 2) parameter arrays indexed by element pair, plus cutoff shifts."""
        nc = np.array([[0, 1], [1, 2]])
        D = self.depth * self.carbon_depth_factor**nc
        r0 = self.r0 * self.carbon_radius_factor**nc
        rc = self.r_cut * self.carbon_radius_factor**nc
        alpha = np.full((2, 2), self.alpha)
        e_rc, f_rc = _morse(rc, D, alpha, r0)
        return {"D": D, "alpha": alpha, "r0": r0, "rc": rc, "e_rc": e_rc, "f_rc": f_rc}

    @property
    def max_cutoff(self) -> float:
        return float(self.tables["rc"].max())

    def equilibrium_distance(self, a: int = 0, b: int = 0) -> float:
        """Separation where the shifted pair force vanishes (the pair minimum)."""
        t = self.tables
        r0, rc = t["r0"][a, b], t["rc"][a, b]
        return brentq(lambda r: float(self.pair(r, a, b)[1]), 0.5 * r0, min(2 * r0, rc - 1e-9), xtol=1e-15)

    def pair(self, r, a: int = 0, b: int = 0):
        """Shifted energy and dU/dr for element pair (a, b) at distance r."""
        t = self.tables
        r = np.asarray(r, dtype=float)
        u, du = _morse(r, t["D"][a, b], t["alpha"][a, b], t["r0"][a, b])
        rc = t["rc"][a, b]
        u = u - t["e_rc"][a, b] - (r - rc) * t["f_rc"][a, b]
        du = du - t["f_rc"][a, b]
        inside = r < rc
        return np.where(inside, u, 0.0), np.where(inside, du, 0.0)

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "depth": self.depth,
            "alpha": self.alpha,
            "r0": self.r0,
            "r_cut": self.r_cut,
            "carbon_depth_factor": self.carbon_depth_factor,
            "carbon_radius_factor": self.carbon_radius_factor,
            "min_separation": self.min_separation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairPotential":
        d = dict(d)
        lattice = d.pop("lattice_constant", None)
        form = d.pop("form", "morse_shifted_force")
        if form != "morse_shifted_force":
            raise ValueError(f"unsupported potential form {form!r}")
        if lattice is not None and "r0" not in d:
            return cls.for_lattice(lattice, **d)
        return cls(**d)
