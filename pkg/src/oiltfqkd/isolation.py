"""Trojan-wavelength isolation accounting.

Spectral profiles are interpolated linearly in (nm, dB) and never
extrapolated. Attenuation is positive dB; a transparency gain is a negative
attenuation, so it subtracts from a cascade.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import OutOfRangeError, check_positive
from .csvio import format_rows
from .special import photon_energy

REFERENCE_ISOLATION_DB = 200.0
DEFAULT_LIDT_W = 100.0
DEFAULT_LIDT_WAVELENGTH_NM = 1550.0


class ProfileKind(str, enum.Enum):
    ATTENUATION = "attenuation"
    TRANSPARENCY_GAIN = "transparency_gain"
    RESPONSIVITY = "responsivity"


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    wavelength_nm: np.ndarray
    value_db: np.ndarray
    kind: ProfileKind = ProfileKind.ATTENUATION
    name: str = "profile"

    def __post_init__(self):
        wl = np.asarray(self.wavelength_nm, dtype=float)
        val = np.asarray(self.value_db, dtype=float)
        if wl.ndim != 1 or wl.shape != val.shape or wl.size < 2:
            raise ValueError(f"SpectralProfile {self.name!r} needs >= 2 matching points")
        if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(val))):
            raise ValueError(f"SpectralProfile {self.name!r} has non-finite points")
        if np.any(np.diff(wl) <= 0):
            raise ValueError(f"SpectralProfile {self.name!r} wavelengths must be strictly increasing")
        for arr in (wl, val):
            arr.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "value_db", val)
        object.__setattr__(self, "kind", ProfileKind(self.kind))

    @property
    def range_nm(self) -> tuple[float, float]:
        return float(self.wavelength_nm[0]), float(self.wavelength_nm[-1])

    def covers(self, wavelength_nm: float) -> bool:
        lo, hi = self.range_nm
        return lo <= wavelength_nm <= hi

    def __call__(self, wavelength_nm):
        q = np.asarray(wavelength_nm, dtype=float)
        lo, hi = self.range_nm
        if np.any(q < lo) or np.any(q > hi):
            raise OutOfRangeError(
                f"{self.name!r} covers {lo:g}-{hi:g} nm; queried {wavelength_nm!r}")
        out = np.interp(q, self.wavelength_nm, self.value_db)
        return float(out) if out.ndim == 0 else out

    @property
    def attenuation_sign(self) -> float:
        return -1.0 if self.kind is ProfileKind.TRANSPARENCY_GAIN else 1.0

    def to_csv(self) -> str:
        return format_rows(["wavelength_nm", "value_db"],
                           zip(self.wavelength_nm.tolist(), self.value_db.tolist()))

    @classmethod
    def from_csv(cls, source, kind: ProfileKind | str = ProfileKind.ATTENUATION,
                 name: str | None = None) -> "SpectralProfile":
        """Read a ``wavelength_nm,value_db`` CSV from a path or from CSV text."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            path = Path(source)
            text = path.read_text(encoding="utf-8")
            name = name or path.stem
        else:
            text = source
        lines = text.lstrip("﻿").splitlines()
        header = [h.strip() for h in lines[0].split(",")] if lines else []
        if header != ["wavelength_nm", "value_db"]:
            raise ValueError(f"expected header 'wavelength_nm,value_db', got {lines[:1]}")
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1], kind=kind, name=name or "profile")


def lidt_at(wavelength_nm: float, reference_power: float = DEFAULT_LIDT_W,
            reference_wavelength_nm: float = DEFAULT_LIDT_WAVELENGTH_NM) -> float:
    """Fibre damage threshold (W), scaled with the square root of wavelength."""
    for name, v in (("wavelength_nm", wavelength_nm),
                    ("reference_wavelength_nm", reference_wavelength_nm)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v!r}")
    check_positive(reference_power, "reference_power")
    return math.sqrt(wavelength_nm / reference_wavelength_nm) * reference_power


def _overlap_grid(a: SpectralProfile, b: SpectralProfile) -> np.ndarray:
    lo = max(a.range_nm[0], b.range_nm[0])
    hi = min(a.range_nm[1], b.range_nm[1])
    if lo > hi:
        raise ValueError(f"profiles {a.name!r} and {b.name!r} do not overlap")
    grid = np.union1d(a.wavelength_nm, b.wavelength_nm)
    grid = np.union1d(grid[(grid >= lo) & (grid <= hi)], [lo, hi])
    if grid.size < 2:
        raise ValueError(f"profiles {a.name!r} and {b.name!r} overlap in a single point")
    return grid


def transparency_gain(loss_disconnected: SpectralProfile,
                      loss_connected_off: SpectralProfile) -> SpectralProfile:
    """Transparency gained by connecting the (unpowered) laser: loss difference in dB."""
    grid = _overlap_grid(loss_disconnected, loss_connected_off)
    gain = loss_disconnected(grid) - loss_connected_off(grid)
    return SpectralProfile(grid, gain, ProfileKind.TRANSPARENCY_GAIN, name="transparency_gain")


def _crossings(x: np.ndarray, y: np.ndarray, level: float) -> np.ndarray:
    s = y - level
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return x[idx] + (x[idx + 1] - x[idx]) * s[idx] / (s[idx] - s[idx + 1])


def vulnerable_windows(gain: SpectralProfile, pd_responsivity: SpectralProfile,
                       responsivity_floor_db: float = -20.0, *,
                       relative_to_peak: bool = True) -> list[tuple[float, float]]:
    """Maximal wavelength intervals with positive gain and sub-floor photodiode responsivity.

    With ``relative_to_peak`` the floor is measured from the responsivity
    maximum. Boundaries are placed at the exact crossings of the piecewise
    linear profiles.
    """
    floor = responsivity_floor_db
    if relative_to_peak:
        floor += float(np.max(pd_responsivity.value_db))
    grid = _overlap_grid(gain, pd_responsivity)
    extra = np.concatenate([_crossings(grid, gain(grid), 0.0),
                            _crossings(grid, pd_responsivity(grid), floor)])
    grid = np.union1d(grid, extra)
    mid = 0.5 * (grid[:-1] + grid[1:])
    ok = (gain(mid) > 0) & (pd_responsivity(mid) < floor)
    windows: list[tuple[float, float]] = []
    for i in np.nonzero(ok)[0]:
        start, end = float(grid[i]), float(grid[i + 1])
        if windows and windows[-1][1] == start:
            windows[-1] = (windows[-1][0], end)
        else:
            windows.append((start, end))
    return windows


def cascade_isolation(components, wavelength_nm: float) -> float:
    """Total attenuation (dB) of a chain of components at one wavelength."""
    total = 0.0
    for comp in components:
        if not comp.covers(wavelength_nm):
            lo, hi = comp.range_nm
            raise OutOfRangeError(
                f"component {comp.name!r} covers {lo:g}-{hi:g} nm, not {wavelength_nm:g} nm")
        total += comp.attenuation_sign * comp(wavelength_nm)
    return total


@dataclass(frozen=True)
class BudgetReport:
    wavelength_nm: float
    lidt_w: float
    total_isolation_db: float
    worst_case_output_w: float
    worst_case_photons_per_pulse: float
    meets_target: bool
    required_isolation_db: float
    shortfall_vs_reference_db: float


def required_isolation_db(input_power_w: float, wavelength_nm: float, pulse_rate: float,
                          max_photons_per_pulse: float) -> float:
    """Isolation bringing ``input_power_w`` down to the tolerated photons per pulse."""
    tolerated_w = max_photons_per_pulse * photon_energy(wavelength_nm) * pulse_rate
    return 10.0 * math.log10(input_power_w / tolerated_w)


def budget_report(wavelength_nm: float, components, pulse_rate: float,
                  max_photons_per_pulse: float, *, reference_power: float = DEFAULT_LIDT_W,
                  reference_wavelength_nm: float = DEFAULT_LIDT_WAVELENGTH_NM) -> BudgetReport:
    """Worst-case leakage of an injected Trojan beam through a component cascade.

    ``max_photons_per_pulse`` is the caller's security target; no default is
    assumed. ``shortfall_vs_reference_db`` compares the cascade with the
    200 dB isolation usually quoted for leakage-free operation (positive means
    short of it).
    """
    check_positive(pulse_rate, "pulse_rate")
    check_positive(max_photons_per_pulse, "max_photons_per_pulse")
    lidt = lidt_at(wavelength_nm, reference_power, reference_wavelength_nm)
    iso = cascade_isolation(list(components), wavelength_nm)
    out_w = lidt * 10.0 ** (-iso / 10.0)
    photons = out_w / (photon_energy(wavelength_nm) * pulse_rate)
    return BudgetReport(
        wavelength_nm=float(wavelength_nm), lidt_w=lidt, total_isolation_db=iso,
        worst_case_output_w=out_w, worst_case_photons_per_pulse=photons,
        meets_target=bool(photons <= max_photons_per_pulse),
        required_isolation_db=required_isolation_db(lidt, wavelength_nm, pulse_rate,
                                                     max_photons_per_pulse),
        shortfall_vs_reference_db=REFERENCE_ISOLATION_DB - iso,
    )
