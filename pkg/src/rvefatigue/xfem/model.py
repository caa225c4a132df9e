"""Macro-scale plate model: geometry, material and loading."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np


@dataclass(frozen=True)
class MacroModel:
    """Thin plate with a single through crack.

    Units are N, mm and MPa throughout (E and G are given in GPa for
    readability and converted on use).

    Attributes:
        length: plate width L along x (mm).
        height: plate height H along y (mm).
        a0: initial crack length (mm). For a centre crack this is the
            full length, tip to tip.
        q: line load on the top and bottom edges (N/mm).
        youngs_gpa: Young's modulus E (GPa).
        poisson: Poisson ratio.
        shear_gpa: shear modulus G (GPa).
        yield_mpa: yield stress (MPa); informational only.
        mode: ``"plane_stress"`` or ``"plane_strain"``.
        load_ratio: macro load ratio R; the cyclic range is (1 - R) * max.
        thickness: out-of-plane thickness (mm); traction = q / thickness.
        crack_position: ``"edge"`` (mouth on the left edge) or ``"center"``.
        crack_y: crack height (mm); defaults to mid-height.
        toughness: optional K_max (MPa*sqrt(mm)) that ends a fatigue run.
    """

    length: float = 60.0
    height: float = 120.0
    a0: float = 10.0
    q: float = 50.0
    youngs_gpa: float = 206.0
    poisson: float = 0.3
    shear_gpa: float = 80.0
    yield_mpa: float = 235.0
    mode: str = "plane_stress"
    load_ratio: float = 0.0
    thickness: float = 1.0
    crack_position: str = "edge"
    crack_y: float | None = None
    toughness: float | None = None

    def __post_init__(self):
        if self.length <= 0 or self.height <= 0:
            raise ValueError("plate dimensions must be positive")
        if not 0 < self.a0 < self.length:
            raise ValueError(f"a0={self.a0} must lie in (0, L={self.length})")
        if self.q <= 0:
            raise ValueError("line load q must be positive")
        if self.mode not in ("plane_stress", "plane_strain"):
            raise ValueError(f"unknown analysis mode {self.mode!r}")
        if self.crack_position not in ("edge", "center"):
            raise ValueError(f"unknown crack position {self.crack_position!r}")
        if not 0 <= self.load_ratio < 1:
            raise ValueError("load ratio must lie in [0, 1)")
        g_iso = self.youngs_gpa / (2 * (1 + self.poisson))
        if abs(g_iso - self.shear_gpa) > 0.01 * g_iso:
            raise ValueError(
                f"G={self.shear_gpa} GPa inconsistent with E/2(1+nu)={g_iso:.2f} GPa"
            )

    @property
    def E(self) -> float:
        """Young's modulus in MPa."""
        return self.youngs_gpa * 1e3

    @property
    def mu(self) -> float:
        """Isotropic shear modulus in MPa (derived from E and nu)."""
        return self.E / (2 * (1 + self.poisson))

    @property
    def kappa(self) -> float:
        nu = self.poisson
        if self.mode == "plane_stress":
            return (3 - nu) / (1 + nu)
        return 3 - 4 * nu

    @property
    def effective_modulus(self) -> float:
        """E' relating J to K: E for plane stress, E/(1-nu^2) for plane strain."""
        if self.mode == "plane_stress":
            return self.E
        return self.E / (1 - self.poisson**2)

    @property
    def traction(self) -> float:
        """Peak remote stress in MPa."""
        return self.q / self.thickness

    @property
    def mid_y(self) -> float:
        return self.height / 2 if self.crack_y is None else self.crack_y

    def elasticity(self) -> np.ndarray:
        """3x3 constitutive matrix in Voigt form (xx, yy, xy engineering)."""
        E, nu = self.E, self.poisson
        if self.mode == "plane_stress":
            c = E / (1 - nu**2)
            return c * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])
        c = E / ((1 + nu) * (1 - 2 * nu))
        return c * np.array(
            [[1 - nu, nu, 0], [nu, 1 - nu, 0], [0, 0, (1 - 2 * nu) / 2]]
        )

    def crack_vertices(self) -> np.ndarray:
        y = self.mid_y
        if self.crack_position == "edge":
            return np.array([[0.0, y], [self.a0, y]])
        xc = self.length / 2
        return np.array([[xc - self.a0 / 2, y], [xc + self.a0 / 2, y]])

    def with_(self, **changes) -> "MacroModel":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MacroModel":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown macro model keys: {sorted(unknown)}")
        return cls(**data)


# Plate of the multi-scale study; the crack sits at the centre as described
# for the macroscopic model, which is the reading that reproduces its life.
TABLE1 = MacroModel(crack_position="center")

# Same plate with the crack on the left edge (single-edge-notch tension).
TABLE1_EDGE = MacroModel(crack_position="edge")


def sent_correction(a_over_w: float) -> float:
    """Geometry factor Y for single-edge-notch tension, K = Y*sigma*sqrt(pi*a).

    Tada/Brown-Srawley polynomial, accurate to about 0.5% for a/W <= 0.6.
    """
    x = a_over_w
    return 1.12 - 0.231 * x + 10.55 * x**2 - 21.72 * x**3 + 30.39 * x**4


def center_crack_correction(a_over_w: float) -> float:
    """Feddersen secant factor for a centre crack; a is the half-length."""
    return float(np.sqrt(1.0 / np.cos(np.pi * a_over_w)))
