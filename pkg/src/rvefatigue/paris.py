"""Paris-law bookkeeping: stress intensity, growth-rate points and the log-log fit."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# unit system tag -> (length unit in metres, stress unit in MPa)
UNIT_SYSTEMS = {
    "mpa_sqrt_m": (1.0, 1.0),
    "mpa_sqrt_mm": (1e-3, 1.0),
    "gpa_sqrt_angstrom": (1e-10, 1e3),
}


class NoGrowthError(ValueError):
    """Raised when a sample series yields too few positive growth points."""


def _check_units(units: str) -> None:
    if units not in UNIT_SYSTEMS:
        raise ValueError(f"unknown unit system {units!r}; choose from {sorted(UNIT_SYSTEMS)}")


@dataclass(frozen=True)
class CycleSample:
    """Crack length and tip-stress extremes recorded for one load cycle."""

    N: float
    a: float
    sigma_max: float
    sigma_min: float

    def __post_init__(self):
        if self.sigma_min > self.sigma_max:
            raise ValueError(f"sigma_min={self.sigma_min} exceeds sigma_max={self.sigma_max}")
        if self.a <= 0:
            raise ValueError(f"crack length must be positive, got {self.a}")


@dataclass(frozen=True)
class ParisConstants:
    C: float
    m: float
    units: str = "mpa_sqrt_m"
    r2: float = float("nan")
    n_points: int = 0
    dk_window: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _check_units(self.units)
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"C must be positive and finite, got {self.C}")
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"m must be positive and finite, got {self.m}")

    def rate(self, dk):
        """da/dN for a stress-intensity range in this unit system."""
        return self.C * np.asarray(dk, dtype=float) ** self.m

    def convert(self, units: str) -> "ParisConstants":
        """Re-express C in another unit system; m is unit-free."""
        _check_units(units)
        l0, s0 = UNIT_SYSTEMS[self.units]
        l1, s1 = UNIT_SYSTEMS[units]
        lam = l0 / l1  # new length units per old length unit
        sig = s0 / s1
        k_factor = sig * math.sqrt(lam)
        C = self.C * lam / k_factor**self.m
        win = None
        if self.dk_window is not None:
            win = (self.dk_window[0] * k_factor, self.dk_window[1] * k_factor)
        return ParisConstants(C, self.m, units, self.r2, self.n_points, win, dict(self.extra))

    def to_json(self) -> str:
        d = asdict(self)
        d["dk_window"] = list(self.dk_window) if self.dk_window else None
        if not math.isfinite(self.r2):
            d["r2"] = None
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_mapping(cls, d: dict) -> "ParisConstants":
        win = d.get("dk_window")
        r2 = d.get("r2")
        return cls(
            C=float(d["C"]),
            m=float(d["m"]),
            units=d.get("units", "mpa_sqrt_m"),
            r2=float("nan") if r2 is None else float(r2),
            n_points=int(d.get("n_points", 0)),
            dk_window=tuple(win) if win else None,
            extra=dict(d.get("extra", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ParisConstants":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def stress_intensity(sigma_y, a):
    """Griffith mode-I stress intensity K_I = sigma * sqrt(pi * a)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("crack length must be non-negative")
    out = np.asarray(sigma_y, dtype=float) * np.sqrt(np.pi * a)
    return float(out) if out.ndim == 0 else out


def delta_k(sample: CycleSample) -> float:
    if sample.sigma_min > sample.sigma_max:
        raise ValueError("sigma_min exceeds sigma_max")
    return stress_intensity(sample.sigma_max, sample.a) - stress_intensity(sample.sigma_min, sample.a)


def default_window(dks: Sequence[float], trim: float = 0.10) -> tuple[float, float]:
    """dK bounds left after dropping the ``trim`` fraction of values at each end.

    The count dropped per end is floor(trim * n), so short series keep
    their extremes.
    """
    dks = np.sort(np.asarray(dks, dtype=float))
    if dks.size == 0:
        raise ValueError("no dK values to window")
    k = int(math.floor(trim * dks.size + 1e-9))
    return float(dks[k]), float(dks[dks.size - 1 - k])


def growth_points(
    samples: Sequence[CycleSample],
    window: tuple[float, float] | None = None,
    trim: float = 0.10,
) -> tuple[np.ndarray, np.ndarray]:
    """(dK, da/dN) per interval between consecutive samples.

    The rate is the forward difference over an interval and dK the mean of
    the two end-point ranges. Non-positive rates and dK values outside
    ``window`` are dropped; when no window is given the lowest and highest
    ``trim`` fractions of dK are discarded.
    """
    if len(samples) < 3:
        raise ValueError("need at least three cycle samples")
    N = np.array([s.N for s in samples], dtype=float)
    if np.any(np.diff(N) <= 0):
        raise ValueError("cycle numbers must be strictly increasing")
    a = np.array([s.a for s in samples], dtype=float)
    dk = np.array([delta_k(s) for s in samples])
    rate = np.diff(a) / np.diff(N)
    dk_mid = 0.5 * (dk[:-1] + dk[1:])
    keep = rate > 0
    if window is None and keep.sum() > 0:
        window = default_window(dk_mid[keep], trim)
    if window is not None:
        keep &= (dk_mid >= window[0]) & (dk_mid <= window[1])
    return dk_mid[keep], rate[keep]


def fit_paris(
    dk: Iterable[float], rate: Iterable[float], units: str = "mpa_sqrt_m"
) -> ParisConstants:
    """Least-squares line through (log10 dK, log10 da/dN): slope m, intercept log10 C."""
    x = np.asarray(list(dk), dtype=float)
    y = np.asarray(list(rate), dtype=float)
    if len(x) != len(y):
        raise ValueError("dK and rate lengths differ")
    if len(x) < 2:
        raise NoGrowthError(f"need at least two growth points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("dK and da/dN must be positive for a log-log fit")
    lx, ly = np.log10(x), np.log10(y)
    if np.ptp(lx) == 0:
        raise ValueError("all growth points share one dK; slope is undefined")
    xm, ym = lx.mean(), ly.mean()
    sxx = np.sum((lx - xm) ** 2)
    m = float(np.sum((lx - xm) * (ly - ym)) / sxx)
    b = float(ym - m * xm)
    resid = ly - (m * lx + b)
    sst = np.sum((ly - ym) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / sst) if sst > 0 else 1.0
    return ParisConstants(
        C=10.0**b,
        m=m,
        units=units,
        r2=r2,
        n_points=len(x),
        dk_window=(float(x.min()), float(x.max())),
    )


def read_samples(path: str | Path) -> list[CycleSample]:
    """Samples from a CSV with columns N, a, sigma_max, sigma_min."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return [
        CycleSample(float(r["N"]), float(r["a"]), float(r["sigma_max"]), float(r["sigma_min"]))
        for r in rows
    ]


def write_samples(path: str | Path, samples: Sequence[CycleSample], seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={int(seed)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "a", "sigma_max", "sigma_min"])
        for s in samples:
            w.writerow([repr(float(s.N)), repr(float(s.a)), repr(float(s.sigma_max)), repr(float(s.sigma_min))])
