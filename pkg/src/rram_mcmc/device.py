"""OxRAM high-conductance-state random variable.

A SET pulse at programming current ``i_set`` leaves the device in the HCS
with a conductance drawn from a normal distribution whose median and
standard deviation follow power laws of the current::

    median(i) = d_i * i**c
    sd(i)     = a * i**b

``d_i`` is the per-device prefactor.  Device-to-device variability is the
spread of ``d_i`` around the population value ``d``.

All quantities are expressed in one unit convention, declared on the
:class:`DeviceLaw` (``"micro"``: uA and uS, ``"si"``: A and S).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class DeviceRangeError(ValueError):
    """Programming current outside the law's [i_min, i_max] window."""


class FitError(ValueError):
    pass


class LutError(ValueError):
    pass


class UnitConvention(str, enum.Enum):
    SI = "si"
    MICRO = "micro"


class CellState(str, enum.Enum):
    LCS = "LCS"
    HCS = "HCS"


# Default truncation floor per convention (1e-3 uS).
_DEFAULT_FLOOR = {UnitConvention.MICRO: 1e-3, UnitConvention.SI: 1e-9}


@dataclass(frozen=True)
class DeviceLaw:
    """Calibrated power-law constants of the HCS distribution.

    ``a``/``b`` are the SD-law prefactor/exponent, ``c``/``d`` the
    median-law exponent/prefactor and ``e`` the standard deviation of the
    per-device median prefactor.
    """

    a: float = 0.093
    b: float = 0.48
    c: float = 0.78
    d: float = 0.19
    e: float = 0.096
    i_min: float = 20.0
    i_max: float = 100.0
    unit_convention: UnitConvention = UnitConvention.MICRO
    g_floor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "unit_convention", UnitConvention(self.unit_convention))
        if self.g_floor is None:
            object.__setattr__(self, "g_floor", _DEFAULT_FLOOR[self.unit_convention])
        for name in ("a", "c", "d", "i_min", "i_max", "g_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DeviceLaw.{name} must be > 0, got {getattr(self, name)!r}")
        # b == 0 and e == 0 are allowed as degenerate test laws
        if self.b < 0 or self.e < 0:
            raise ValueError("DeviceLaw.b and DeviceLaw.e must be >= 0")
        if not self.i_min < self.i_max:
            raise ValueError(f"i_min ({self.i_min}) must be < i_max ({self.i_max})")

    @classmethod
    def from_conductance_range(cls, g_min, g_max, **kwargs):
        """Build a law whose current window maps onto medians [g_min, g_max]."""
        c = kwargs.get("c", cls.c)
        d = kwargs.get("d", cls.d)
        return cls(i_min=(g_min / d) ** (1.0 / c), i_max=(g_max / d) ** (1.0 / c), **kwargs)

    @property
    def g_min(self) -> float:
        return self.d * self.i_min**self.c

    @property
    def g_max(self) -> float:
        return self.d * self.i_max**self.c

    @property
    def units(self) -> tuple[str, str]:
        """(current unit, conductance unit) labels."""
        if self.unit_convention is UnitConvention.MICRO:
            return "uA", "uS"
        return "A", "S"

    def with_(self, **changes) -> "DeviceLaw":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "e": self.e,
            "i_min": self.i_min,
            "i_max": self.i_max,
            "unit_convention": self.unit_convention.value,
            "g_floor": self.g_floor,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceLaw":
        return cls(**data)


@dataclass
class DeviceCell:
    """One 1T1R element."""

    d_i: float
    state: CellState = CellState.LCS
    conductance: float = 0.0

    def __post_init__(self):
        if not self.d_i > 0:
            raise ValueError("per-device prefactor d_i must be > 0")
        self.state = CellState(self.state)
        if self.state is CellState.HCS and not self.conductance > 0:
            raise ValueError("an HCS cell needs a positive conductance")

    def read(self) -> float:
        return self.conductance if self.state is CellState.HCS else 0.0


@dataclass(frozen=True)
class ProgrammingLut:
    """Gate-voltage look-up table: (step, set_current, median_conductance)."""

    entries: tuple[tuple[int, float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ents = tuple((int(k), float(i), float(g)) for k, i, g in self.entries)
        object.__setattr__(self, "entries", ents)
        if len(ents) == 0:
            return
        if len(ents) < 2:
            raise LutError("a programming LUT needs at least 2 entries")
        currents = [e[1] for e in ents]
        medians = [e[2] for e in ents]
        if any(x >= y for x, y in zip(currents, currents[1:])) or any(
            x >= y for x, y in zip(medians, medians[1:])
        ):
            raise LutError("LUT entries must be strictly increasing in current and conductance")

    @classmethod
    def uniform(cls, law: DeviceLaw, n_entries: int = 21) -> "ProgrammingLut":
        """Entries evenly spaced in current over [i_min, i_max]."""
        currents = np.linspace(law.i_min, law.i_max, n_entries)
        return cls(tuple((k, float(i), float(law.d * i**law.c)) for k, i in enumerate(currents)))

    @property
    def currents(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    @property
    def medians(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])

    def __len__(self):
        return len(self.entries)


def _check_range(law: DeviceLaw, i_set) -> None:
    i = np.asarray(i_set, dtype=float)
    # relative slack so that round-tripped boundary currents are accepted
    lo = law.i_min * (1 - 1e-12)
    hi = law.i_max * (1 + 1e-12)
    if np.any(~((i >= lo) & (i <= hi))):
        raise DeviceRangeError(
            f"SET current outside [{law.i_min:g}, {law.i_max:g}] {law.units[0]}: {i_set!r}"
        )


def median_conductance(law: DeviceLaw, d_i, i_set):
    _check_range(law, i_set)
    return d_i * np.power(i_set, law.c)


def sd_conductance(law: DeviceLaw, i_set):
    _check_range(law, i_set)
    return law.a * np.power(i_set, law.b)


def i_set_for_target(law: DeviceLaw, g_target):
    """Current whose population median equals ``g_target``, clamped to the window.

    Uses the population prefactor ``d``; per-device offsets are invisible to
    the programmer.
    """
    g = np.asarray(g_target, dtype=float)
    if np.any(~(g > 0)):
        # non-positive targets sit below every achievable median
        g = np.where(g > 0, g, law.g_min)
    i = np.clip((g / law.d) ** (1.0 / law.c), law.i_min, law.i_max)
    return float(i) if i.ndim == 0 else i


def quantize_to_lut(lut: ProgrammingLut, law: DeviceLaw, i_set):
    """Snap to the LUT entry whose median conductance is closest; ties go low."""
    if len(lut) == 0:
        raise LutError("empty programming LUT")
    medians = lut.medians
    target = law.d * np.power(np.asarray(i_set, dtype=float), law.c)
    dist = np.abs(target[..., None] - medians)
    # argmin returns the first (lowest) index among exact ties
    idx = np.argmin(dist, axis=-1)
    out = lut.currents[idx]
    return float(out) if out.ndim == 0 else out


def sample_hcs(law: DeviceLaw, d_i, i_set, rng: np.random.Generator, sd_scale: float = 1.0):
    """Draw HCS conductances for a batch of devices, truncated below at ``g_floor``.

    One standard-normal draw per device in C order, then one further draw for
    each truncated device (in index order) until all lie above the floor.
    """
    med = np.atleast_1d(median_conductance(law, d_i, i_set)).astype(float)
    sd = np.broadcast_to(sd_conductance(law, i_set) * sd_scale, med.shape)
    g = med + sd * rng.standard_normal(med.shape)
    bad = np.flatnonzero(g <= law.g_floor)
    while bad.size:
        g.flat[bad] = med.flat[bad] + sd.flat[bad] * rng.standard_normal(bad.size)
        bad = bad[g.flat[bad] <= law.g_floor]
    return g


def set_pulse(cell: DeviceCell, law: DeviceLaw, i_set: float, rng, sd_scale: float = 1.0) -> float:
    g = float(sample_hcs(law, cell.d_i, i_set, rng, sd_scale)[0])
    cell.state = CellState.HCS
    cell.conductance = g
    return g


def reset_pulse(cell: DeviceCell) -> None:
    cell.state = CellState.LCS
    cell.conductance = 0.0


def sample_device_prefactors(law: DeviceLaw, shape, rng: np.random.Generator, d2d: bool = True):
    """Per-device median prefactors ``d_i ~ Normal(d, e)``, redrawn until positive."""
    if not d2d or law.e == 0:
        return np.full(shape, law.d, dtype=float)
    out = law.d + law.e * rng.standard_normal(shape)
    bad = np.flatnonzero(out <= 0)
    while bad.size:
        out.flat[bad] = law.d + law.e * rng.standard_normal(bad.size)
        bad = bad[out.flat[bad] <= 0]
    return out


def fit_power_law(points) -> tuple[float, float]:
    """Least-squares fit of ``ln y = ln k + p ln x``; returns ``(k, p)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise FitError("power-law fit needs at least 2 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise FitError("power-law fit needs strictly positive x and y")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("power-law fit needs distinct x values")
    slope, intercept = np.polyfit(lx, ly, 1)
    return math.exp(intercept), float(slope)
