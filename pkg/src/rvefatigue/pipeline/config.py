"""Pipeline configuration: TOML sections, validation and the built-in presets."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..md.config import ConfigError, MDConfig
from ..paris import UNIT_SYSTEMS, ParisConstants
from ..vision.extract import ExtractionSettings
from ..xfem.fatigue import DEFAULT_SNAPSHOTS
from ..xfem.model import TABLE1, MacroModel

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

SECTIONS = ("rve", "potential", "loading", "extraction", "fit", "macro", "output")
MICRO_SECTIONS = ("rve", "loading", "extraction")


@dataclass(frozen=True)
class ExtractionConfig:
    """How cycles are sampled and how crack lengths are read off the rasters.

    Besides the image-chain settings this holds the sampling knobs of the
    MD run: emission period, tip half-disc radius and the number of steps
    averaged for the peak and minimum stresses.
    """

    settings: ExtractionSettings = field(default_factory=ExtractionSettings)
    emit_every: int = 1
    sample_radius: float = 10.0
    average_steps: int = 100

    def to_dict(self) -> dict:
        d = asdict(self.settings)
        d.update(emit_every=self.emit_every, sample_radius=self.sample_radius, average_steps=self.average_steps)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "ExtractionConfig":
        own = {"emit_every", "sample_radius", "average_steps"}
        known = own | {f.name for f in fields(ExtractionSettings)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown extraction keys: {sorted(unknown)}")
        settings = ExtractionSettings(**{k: v for k, v in data.items() if k not in own})
        if settings.mouth not in ("left", "right", "top", "bottom"):
            raise ConfigError(f"unknown mouth edge {settings.mouth!r}")
        if settings.median_window < 3 or settings.median_window % 2 == 0:
            raise ConfigError("median_window must be an odd integer >= 3")
        cfg = cls(settings, **{k: v for k, v in data.items() if k in own})
        if cfg.emit_every < 1 or cfg.average_steps < 1 or not cfg.sample_radius > 0:
            raise ConfigError("emit_every, average_steps and sample_radius must be positive")
        return cfg


@dataclass(frozen=True)
class FitConfig:
    """Paris fit settings, or constants supplied instead of fitting.

    Attributes:
        units: unit system of the MD samples and of the fitted C.
        trim: fraction of dK values dropped at each end when ``window`` is unset.
        window: explicit (dK_lo, dK_hi) Region II window.
        constants: {m, C, units} used as-is; skips the micro stages.
        paris_file: a paris.json to use as-is; skips the micro stages.
        samples_file: a samples CSV (N, a, sigma_max, sigma_min) to fit;
            skips MD and extraction.
    """

    units: str = "gpa_sqrt_angstrom"
    trim: float = 0.10
    window: tuple[float, float] | None = None
    constants: dict | None = None
    paris_file: str | None = None
    samples_file: str | None = None

    def __post_init__(self):
        if self.units not in UNIT_SYSTEMS:
            raise ConfigError(f"unknown unit system {self.units!r}")
        if not 0 <= self.trim < 0.5:
            raise ConfigError("fit.trim must lie in [0, 0.5)")
        if self.window is not None and not (len(self.window) == 2 and self.window[0] < self.window[1]):
            raise ConfigError("fit.window must be [lo, hi] with lo < hi")
        if sum(x is not None for x in (self.constants, self.paris_file, self.samples_file)) > 1:
            raise ConfigError("give at most one of fit.constants, fit.paris_file, fit.samples_file")
        if self.constants is not None:
            try:
                ParisConstants.from_mapping(self.constants)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad fit.constants: {exc}") from exc

    @property
    def supplies_constants(self) -> bool:
        return self.constants is not None or self.paris_file is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.window is not None:
            d["window"] = list(self.window)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "FitConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown fit keys: {sorted(unknown)}")
        d = dict(data)
        if d.get("window") is not None:
            d["window"] = tuple(float(v) for v in d["window"])
        return cls(**d)


@dataclass(frozen=True)
class MacroConfig:
    """Plate model plus the propagation controls of the life prediction."""

    model: MacroModel = TABLE1
    da: float = 1.0
    element_size: float = 1.0
    snapshots: tuple[float, ...] = DEFAULT_SNAPSHOTS
    max_steps: int = 500
    boundary_margin: float = 2.0

    def __post_init__(self):
        if not (self.da > 0 and self.element_size > 0):
            raise ConfigError("macro.da and macro.element_size must be positive")
        if self.max_steps < 1:
            raise ConfigError("macro.max_steps must be positive")

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.model.to_dict().items() if v is not None}
        d.update(
            da=self.da, element_size=self.element_size, snapshots=list(self.snapshots),
            max_steps=self.max_steps, boundary_margin=self.boundary_margin,
        )
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "MacroConfig":
        own = {f.name for f in fields(cls)} - {"model"}
        d = {k: v for k, v in data.items() if k in own}
        if "snapshots" in d:
            d["snapshots"] = tuple(float(v) for v in d["snapshots"])
        base = TABLE1.to_dict()
        base.update({k: v for k, v in data.items() if k not in own})
        try:
            model = MacroModel.from_dict(base)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(model, **d)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs.

    ``md`` holds the [rve], [potential] and [loading] tables; its RVE seed
    drives every random choice and is written into each artifact.
    """

    md: MDConfig = field(default_factory=MDConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    macro: MacroConfig = field(default_factory=MacroConfig)
    outdir: Path = Path("runs")
    write_snapshots: bool = True

    @property
    def seed(self) -> int:
        return self.md.rve.seed

    def to_dict(self) -> dict:
        d = self.md.to_dict()
        d["extraction"] = self.extraction.to_dict()
        d["fit"] = self.fit.to_dict()
        d["macro"] = self.macro.to_dict()
        d["output"] = {"dir": str(self.outdir), "snapshots": self.write_snapshots}
        return d

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "PipelineConfig":
        """Build and validate from nested tables.

        File paths inside [fit] are resolved against ``base_dir``.

        Raises:
            ConfigError: unknown or missing sections, or invalid values.
        """
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}")
        for name in ("fit", "macro", "output"):
            if name not in data:
                raise ConfigError(f"missing section [{name}]")
        try:
            fit = FitConfig.from_dict(data["fit"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if base_dir is not None:
            fit = _resolve_paths(fit, base_dir)
        if not fit.supplies_constants and fit.samples_file is None:
            missing = [s for s in MICRO_SECTIONS if s not in data]
            if missing:
                raise ConfigError(f"missing sections {missing} (needed unless [fit] supplies constants)")
        md = MDConfig.from_dict({k: data[k] for k in ("rve", "potential", "loading") if k in data})
        try:
            extraction = ExtractionConfig.from_dict(data.get("extraction", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        macro = MacroConfig.from_dict(data["macro"])
        out = dict(data["output"])
        bad = set(out) - {"dir", "snapshots"}
        if bad:
            raise ConfigError(f"unknown output keys: {sorted(bad)}")
        outdir = Path(out.get("dir", "runs"))
        if base_dir is not None and not outdir.is_absolute():
            outdir = base_dir / outdir
        return cls(md, extraction, fit, macro, outdir, bool(out.get("snapshots", True)))

    def replace(self, **changes) -> "PipelineConfig":
        """Copy with top-level fields or dotted section keys changed.

        Example: ``cfg.replace(**{"rve.seed": 3, "outdir": Path("x")})``.
        """
        direct = {k: v for k, v in changes.items() if "." not in k}
        data = self.to_dict()
        for key, value in changes.items():
            if "." in key:
                section, name = key.split(".", 1)
                data.setdefault(section, {})[name] = value
        cfg = PipelineConfig.from_dict(data)
        kw = {"outdir": self.outdir, "write_snapshots": self.write_snapshots}
        kw.update(direct)
        return PipelineConfig(cfg.md, cfg.extraction, cfg.fit, cfg.macro, **kw)


def _resolve_paths(fit: FitConfig, base_dir: Path) -> FitConfig:
    d = asdict(fit)
    for key in ("paris_file", "samples_file"):
        if d[key] is not None and not Path(d[key]).is_absolute():
            d[key] = str(base_dir / d[key])
    return FitConfig(**d)


# Desk-scale run: a 60 x 60 Angstrom plate whose 24 Angstrom blunt notch
# grows over ten cycles, and a coarse macro mesh.
CI_PRESET: dict = {
    "rve": {
        "box": [60.0, 60.0, 8.55],
        "lattice": 2.85,
        "c_fraction": 0.0,
        "vacancy_fraction": 0.0,
        "crack_length": 24.0,
        "crack_kind": "blunt",
        "seed": 1,
        "temperature": 10.0,
    },
    "loading": {
        "strain_rate": 4e9,
        "load_ratio": 0.5,
        "peak_start": 0.036,
        "peak_increment": 0.0015,
        "cycles": 10,
    },
    "extraction": {"resolution": 1.0, "average_steps": 500},
    "fit": {"units": "gpa_sqrt_angstrom", "trim": 0.10},
    "macro": {"crack_position": "center", "da": 2.0, "element_size": 2.0},
    "output": {"dir": "runs/ci"},
}

# The full-size study: 200 x 200 x 10 Angstrom plate, 40 Angstrom notch.
PAPER_PRESET: dict = {
    "rve": {
        "box": [200.0, 200.0, 10.0],
        "lattice": 2.85,
        "c_fraction": 0.0,
        "vacancy_fraction": 0.0,
        "crack_length": 40.0,
        "crack_kind": "blunt",
        "seed": 1,
        "temperature": 10.0,
    },
    "loading": {
        "strain_rate": 1e9,
        "load_ratio": 0.5,
        "peak_start": 0.02,
        "peak_increment": 0.002,
        "cycles": 20,
    },
    "extraction": {"resolution": 1.0},
    "fit": {"units": "gpa_sqrt_angstrom", "trim": 0.10},
    "macro": {"crack_position": "center", "da": 1.0, "element_size": 1.0},
    "output": {"dir": "runs/paper"},
}

PRESETS = {"ci": CI_PRESET, "paper": PAPER_PRESET}

# Defect content of the carbon-bearing variants.
DEFECTED = {"c_fraction": 0.002, "vacancy_fraction": 0.005}


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, nested tables are merged."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "constants":
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_dict(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_pipeline_config(path: str | Path | None = None, preset: str | None = None) -> PipelineConfig:
    """Read a TOML file, optionally layered over a named preset.

    A file may name its own base with a top-level ``preset = "ci"`` key.
    Relative paths in the file resolve against the file's directory.
    """
    data: dict = {}
    base_dir = None
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        base_dir = Path(path).resolve().parent
    file_preset = data.pop("preset", None)
    preset = preset or file_preset
    if preset is not None:
        data = merge(preset_dict(preset), data)
    if not data:
        raise ConfigError("no configuration given: pass a config file or a preset")
    return PipelineConfig.from_dict(data, base_dir)
