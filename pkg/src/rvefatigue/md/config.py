"""TOML configuration for an MD run: [rve], [potential] and [loading] tables."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .loading import LoadProgram
from .potential import PairPotential
from .system import AtomSystem, CrackSpec, build_rve

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    """Missing, unknown or invalid configuration entries."""


@dataclass(frozen=True)
class RVEConfig:
    """Geometry, composition and initial state of the plate.

    Attributes:
        box: (x, y, z) lengths in Angstrom.
        lattice: BCC lattice constant in Angstrom.
        c_fraction: carbon atoms per lattice site.
        vacancy_fraction: vacancies per lattice site.
        crack_length: pre-crack length from the left face, Angstrom.
        crack_kind: "blunt" or "sharp".
        seed: drives defect placement and initial velocities.
        temperature: initial temperature of the mobile atoms, K.
        relax_tolerance: FIRE force tolerance before loading, eV/Angstrom.
        interstitial_share: fraction of carbon put on octahedral sites.
    """

    box: tuple[float, float, float] = (100.0, 100.0, 8.55)
    lattice: float = 2.85
    c_fraction: float = 0.0
    vacancy_fraction: float = 0.0
    crack_length: float = 40.0
    crack_kind: str = "blunt"
    seed: int = 1
    temperature: float = 10.0
    relax_tolerance: float = 1e-3
    interstitial_share: float = 0.5

    def build(self) -> AtomSystem:
        return build_rve(
            self.box,
            self.lattice,
            self.c_fraction,
            self.vacancy_fraction,
            CrackSpec(self.crack_length, self.crack_kind),
            self.seed,
            interstitial_share=self.interstitial_share,
        )


@dataclass(frozen=True)
class MDConfig:
    rve: RVEConfig = field(default_factory=RVEConfig)
    potential: PairPotential = field(default_factory=PairPotential)
    loading: LoadProgram = field(default_factory=LoadProgram)

    def to_dict(self) -> dict:
        rve = asdict(self.rve)
        rve["box"] = list(rve["box"])
        return {"rve": rve, "potential": self.potential.to_dict(), "loading": self.loading.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "MDConfig":
        """Build from nested tables; missing tables and keys take defaults.

        Raises:
            ConfigError: unknown keys or values the components reject.
        """
        try:
            rve = _construct(RVEConfig, data.get("rve", {}), "rve")
            if "box" in data.get("rve", {}):
                box = tuple(float(v) for v in data["rve"]["box"])
                if len(box) != 3:
                    raise ConfigError("rve.box needs three lengths")
                rve = RVEConfig(**{**asdict(rve), "box": box})
            CrackSpec(rve.crack_length, rve.crack_kind)
            pot = data.get("potential", {})
            unknown = set(pot) - set(PairPotential().to_dict()) - {"lattice_constant"}
            if unknown:
                raise ConfigError(f"unknown potential keys: {sorted(unknown)}")
            potential = PairPotential.from_dict(pot)
            loading = _construct(LoadProgram, data.get("loading", {}), "loading")
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(rve, potential, loading)


def _construct(kind, table: dict, name: str):
    known = {f.name for f in fields(kind)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    return kind(**{k: v for k, v in table.items() if k != "box"})


def load_md_config(path: str | Path) -> MDConfig:
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return MDConfig.from_dict(data)
