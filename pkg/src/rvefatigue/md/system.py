"""Atom container and construction of the cracked BCC plate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potential import C_INT, C_SUB, ELEMENT, FE, SPECIES_NAMES
from .units import MASS

MOBILE, FIXED_TOP, FIXED_BOTTOM = 0, 1, 2
SPECIES_MASS = np.array([MASS["Fe"], MASS["C"], MASS["C"]])


@dataclass
class AtomSystem:
    """State of an MD run.

    Attributes:
        positions: (n, 3) Angstrom.
        velocities: (n, 3) Angstrom/ps.
        species: (n,) codes FE, C_SUB, C_INT.
        box: (3,) box lengths in Angstrom; the box spans [0, L) per axis.
        periodic: per-axis periodicity.
        group: (n,) MOBILE, FIXED_TOP or FIXED_BOTTOM.
        anchors: (n, 3) reference positions of fixed atoms (rows of mobile
            atoms are unused).
        side: (n,) +1/-1 for atoms on the two faces of a cut seam, 0
            elsewhere; pairs on opposite faces do not interact.
        strain: current applied y strain of the fixed slabs.
        time: elapsed time in ps.
        info: provenance (seed, crack geometry, composition).
    """

    positions: np.ndarray
    velocities: np.ndarray
    species: np.ndarray
    box: np.ndarray
    periodic: tuple[bool, bool, bool] = (False, False, True)
    group: np.ndarray | None = None
    anchors: np.ndarray | None = None
    side: np.ndarray | None = None
    strain: float = 0.0
    time: float = 0.0
    info: dict = field(default_factory=dict)
    forces: np.ndarray | None = field(default=None, repr=False)
    _pairs: tuple | None = field(default=None, repr=False)
    _ref: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        n = len(self.positions)
        self.velocities = np.ascontiguousarray(
            np.zeros((n, 3)) if self.velocities is None else self.velocities, dtype=float
        )
        self.species = np.asarray(self.species, dtype=np.int64)
        self.box = np.asarray(self.box, dtype=float)
        self.periodic = tuple(bool(p) for p in self.periodic)
        if self.group is None:
            self.group = np.zeros(n, dtype=np.int64)
        self.group = np.asarray(self.group, dtype=np.int64)
        if self.anchors is None:
            self.anchors = self.positions.copy()
        if self.side is None:
            self.side = np.zeros(n, dtype=np.int64)
        self.side = np.asarray(self.side, dtype=np.int64)
        for name in ("velocities", "species", "group", "side"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match positions")
        if np.any(self.box <= 0):
            raise ValueError("box lengths must be positive")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def masses(self) -> np.ndarray:
        return SPECIES_MASS[self.species]

    @property
    def elements(self) -> np.ndarray:
        return ELEMENT[self.species]

    @property
    def mobile(self) -> np.ndarray:
        return self.group == MOBILE

    @property
    def fixed(self) -> np.ndarray:
        return self.group != MOBILE

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.species == k)) for k, name in enumerate(SPECIES_NAMES)}

    def copy(self) -> "AtomSystem":
        return AtomSystem(
            self.positions.copy(),
            self.velocities.copy(),
            self.species.copy(),
            self.box.copy(),
            self.periodic,
            self.group.copy(),
            self.anchors.copy(),
            self.side.copy(),
            self.strain,
            self.time,
            dict(self.info),
        )

    def wrap(self) -> None:
        for k in range(3):
            if self.periodic[k]:
                self.positions[:, k] %= self.box[k]

    def invalidate(self) -> None:
        """Drop cached forces and neighbour list after external edits."""
        self.forces = None
        self._pairs = None
        self._ref = None

    def fixed_targets(self, strain: float) -> np.ndarray:
        """Positions of fixed atoms under a symmetric y strain of the plate."""
        half = 0.5 * strain * self.box[1]
        target = self.anchors.copy()
        target[self.group == FIXED_TOP, 1] += half
        target[self.group == FIXED_BOTTOM, 1] -= half
        return target


@dataclass(frozen=True)
class CrackSpec:
    """Pre-crack on the left face at mid-height.

    Attributes:
        length: from the left face to the tip (Angstrom).
        kind: "blunt" removes a slot ``planes`` lattice half-planes tall with a
            semicircular end; "sharp" cuts bonds across a single plane gap.
        planes: slot height in (010) plane spacings for blunt cracks.
    """

    length: float = 40.0
    kind: str = "blunt"
    planes: int = 4

    def __post_init__(self):
        if self.kind not in ("blunt", "sharp"):
            raise ValueError(f"crack kind must be blunt or sharp, got {self.kind!r}")
        if self.length < 0:
            raise ValueError("crack length must be non-negative")


def bcc_sites(box, lattice: float) -> np.ndarray:
    """All BCC sites with coordinates in [0, L) along each axis."""
    pts = []
    nx, ny, nz = (int(np.ceil(b / lattice)) + 1 for b in box)
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    base = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1) * lattice
    for off in (np.zeros(3), np.full(3, 0.5 * lattice)):
        p = base + off
        keep = np.all((p >= -1e-9) & (p < np.asarray(box) - 1e-9), axis=1)
        pts.append(p[keep])
    out = np.concatenate(pts)
    # deterministic ordering: by z, then y, then x
    return out[np.lexsort((out[:, 0], out[:, 1], out[:, 2]))]


def ideal_site_count(box, lattice: float) -> int:
    return len(bcc_sites(box, lattice))


def build_rve(
    box=(100.0, 100.0, 8.55),
    lattice: float = 2.85,
    c_fraction: float = 0.0,
    vacancy_fraction: float = 0.0,
    crack: CrackSpec | None = CrackSpec(),
    seed: int = 1,
    fixed_planes: int = 3,
    interstitial_share: float = 0.5,
    periodic=(False, False, True),
) -> AtomSystem:
    """Fill a box with BCC Fe, carve the pre-crack and scatter defects.

    Periodic box lengths are rounded to whole lattice constants so the
    crystal is continuous across the boundary. Counts of carbon atoms and
    vacancies are round(fraction * N), where N is the number of lattice
    sites left after carving the crack.

    Raises:
        ValueError: non-positive lattice constant or box, fractions outside
            [0, 0.05], a crack at least as long as the box, or a crack
            slot taller than the box.
    """
    if not lattice > 0:
        raise ValueError("lattice constant must be positive")
    box = np.asarray(box, dtype=float).copy()
    if box.shape != (3,) or np.any(box <= 0):
        raise ValueError("box dimensions must be three positive lengths")
    for name, frac in (("c_fraction", c_fraction), ("vacancy_fraction", vacancy_fraction)):
        if not 0.0 <= frac <= 0.05:
            raise ValueError(f"{name}={frac} outside [0, 0.05]")
    if not 0.0 <= interstitial_share <= 1.0:
        raise ValueError("interstitial_share must lie in [0, 1]")
    for k in range(3):
        if periodic[k]:
            box[k] = max(1, round(box[k] / lattice)) * lattice
    half = 0.5 * lattice
    pos = bcc_sites(box, lattice)
    rng = np.random.default_rng(seed)

    # the crack plane sits between two (010) atomic planes near mid-height
    ys = (np.floor(0.5 * box[1] / half) + 0.5) * half
    side = np.zeros(len(pos), dtype=np.int64)
    if crack is not None and crack.length > 0:
        if crack.length >= box[0]:
            raise ValueError("crack length must be shorter than the box width")
        if crack.kind == "blunt":
            R = 0.5 * crack.planes * half
            if 2 * R >= box[1]:
                raise ValueError("crack slot is taller than the box")
            xc = max(crack.length - R, 0.0)
            dx = pos[:, 0] - xc
            dy = pos[:, 1] - ys
            slot = ((pos[:, 0] < xc) & (np.abs(dy) < R)) | (dx**2 + dy**2 < R**2)
            pos = pos[~slot]
            side = np.zeros(len(pos), dtype=np.int64)
        else:
            side = np.where(pos[:, 0] < crack.length, np.sign(pos[:, 1] - ys), 0).astype(np.int64)

    # fixed slabs: outermost (010) planes at top and bottom
    ymin, ymax = pos[:, 1].min(), pos[:, 1].max()
    tol = 1e-6
    group = np.zeros(len(pos), dtype=np.int64)
    group[pos[:, 1] > ymax - fixed_planes * half + tol] = FIXED_TOP
    group[pos[:, 1] < ymin + fixed_planes * half - tol] = FIXED_BOTTOM

    n_sites = len(pos)
    n_vac = int(round(vacancy_fraction * n_sites))
    n_c = int(round(c_fraction * n_sites))
    n_int = int(round(interstitial_share * n_c))
    n_sub = n_c - n_int
    species = np.full(n_sites, FE, dtype=np.int64)
    candidates = np.flatnonzero(group == MOBILE)
    if n_vac + n_sub > len(candidates):
        raise ValueError("not enough mobile sites for the requested defects")
    picks = rng.permutation(candidates)
    vac = np.sort(picks[:n_vac])
    sub = np.sort(picks[n_vac : n_vac + n_sub])
    species[sub] = C_SUB
    keep = np.ones(n_sites, dtype=bool)
    keep[vac] = False

    extra = np.zeros((0, 3))
    if n_int:
        extra = _octahedral_sites(pos[keep], group[keep], box, lattice, periodic, n_int, rng)
    positions = np.concatenate([pos[keep], extra])
    species = np.concatenate([species[keep], np.full(len(extra), C_INT, dtype=np.int64)])
    group = np.concatenate([group[keep], np.zeros(len(extra), dtype=np.int64)])
    ex_side = np.zeros(len(extra), dtype=np.int64)
    if crack is not None and crack.kind == "sharp" and crack.length > 0 and len(extra):
        ex_side = np.where(extra[:, 0] < crack.length, np.sign(extra[:, 1] - ys), 0).astype(np.int64)
    side = np.concatenate([side[keep], ex_side])
    info = {
        "seed": int(seed),
        "lattice": float(lattice),
        "n_sites": int(n_sites),
        "n_vacancies": int(n_vac),
        "n_carbon": int(n_c),
        "crack_plane_y": float(ys),
        "crack_length": float(crack.length) if crack else 0.0,
        "crack_kind": crack.kind if crack else "none",
    }
    return AtomSystem(positions, None, species, box, periodic, group, positions.copy(), side, info=info)


def _octahedral_sites(pos, group, box, lattice, periodic, count, rng) -> np.ndarray:
    """Pick ``count`` distinct octahedral sites whose two nearest Fe sites exist."""
    from scipy.spatial import cKDTree

    half = 0.5 * lattice
    mobile = pos[group == MOBILE]
    cand = np.concatenate([mobile + off for off in np.eye(3) * half])
    for k in range(3):
        if periodic[k]:
            cand[:, k] %= box[k]
    cand = np.unique(np.round(cand, 6), axis=0)
    inside = np.all((cand >= 0) & (cand < box), axis=1)
    cand = cand[inside]
    # open axes get a period three boxes long, so nothing wraps across them
    period = np.where(periodic, box, 3 * box)
    tree = cKDTree(pos, boxsize=period)
    q = cand.copy()
    near = tree.query_ball_point(q, 1.01 * half, return_length=True)
    cand = cand[np.asarray(near) >= 2]
    if len(cand) < count:
        raise ValueError("not enough octahedral sites for the requested interstitials")
    order = np.lexsort((cand[:, 0], cand[:, 1], cand[:, 2]))
    chosen = rng.choice(len(cand), size=count, replace=False)
    return cand[order][np.sort(chosen)]
