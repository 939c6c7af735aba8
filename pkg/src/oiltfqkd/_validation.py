"""Input validation helpers shared by the public API.

All checks raise ``ValueError`` (or a subclass) with a message naming the
owning type and field, so configuration errors can be reported per field.
"""
from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np
from sklearn.utils import check_array


class NonDistillableError(ValueError):
    """Raised when a configuration cannot distil key (e.g. zero single-photon yield)."""


class OutOfRangeError(ValueError):
    """Raised when a spectral profile is queried outside its measured range."""


def _fmt(owner: str, field: str) -> str:
    return f"{owner}.{field}" if owner else field


def check_finite(value, field: str, owner: str = "") -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{_fmt(owner, field)} must be finite, got {value!r}")
    return value


def check_in_interval(value, field: str, low: float, high: float, *,
                      closed_low: bool = True, closed_high: bool = True,
                      owner: str = "") -> float:
    value = check_finite(value, field, owner)
    ok_low = value >= low if closed_low else value > low
    ok_high = value <= high if closed_high else value < high
    if not (ok_low and ok_high):
        lb = "[" if closed_low else "("
        rb = "]" if closed_high else ")"
        raise ValueError(
            f"{_fmt(owner, field)} must be in {lb}{low}, {high}{rb}, got {value!r}")
    return value


def check_positive(value, field: str, owner: str = "", *, allow_zero: bool = False) -> float:
    value = check_finite(value, field, owner)
    if value < 0 or (value == 0 and not allow_zero):
        kind = "non-negative" if allow_zero else "positive"
        raise ValueError(f"{_fmt(owner, field)} must be {kind}, got {value!r}")
    return value


def check_distances(distances) -> np.ndarray:
    """Return distances (km) as a 1-D float array; accepts 1-D or single-column 2-D input."""
    arr = np.asarray(distances, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, ensure_2d=True, dtype=float)
    if arr.shape[1] != 1:
        raise ValueError(f"expected a single distance column, got shape {arr.shape}")
    arr = arr[:, 0]
    if np.any(arr < 0):
        raise ValueError("distances must be non-negative")
    return arr


def collect_violations(checks: Iterable) -> list[str]:
    """Run zero-argument callables and gather the messages of any ``ValueError``."""
    out = []
    for check in checks:
        try:
            check()
        except ValueError as exc:
            out.append(str(exc))
    return out
