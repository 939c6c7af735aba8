"""Special functions used by the key-rate formulas."""
from __future__ import annotations

import math

import numpy as np

_SERIES_LIMIT = 15.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 30


def _i0_series(x: np.ndarray) -> np.ndarray:
    q = (0.5 * x) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _i0_asymptotic(x: np.ndarray) -> np.ndarray:
    # e^x / sqrt(2 pi x) * sum_k [(2k-1)!!]^2 / (k! (8x)^k); terms shrink until k ~ 2x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        total = total + term
    return np.exp(x) / np.sqrt(2.0 * np.pi * x) * total


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero.

    Power series for ``|x| <= 15`` and the large-argument expansion above it;
    relative accuracy is better than 1e-12 for ``|x| <= 50``. Accepts scalars
    or arrays and returns the same shape.

    Raises
    ------
    ValueError
        If any input is NaN or infinite.
    """
    arr = np.abs(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_i0 requires finite input")
    out = np.empty_like(arr)
    small = arr <= _SERIES_LIMIT
    out[small] = _i0_series(arr[small])
    if np.any(~small):
        out[~small] = _i0_asymptotic(arr[~small])
    if out.ndim == 0:
        return float(out)
    return out


def binary_entropy(x):
    """Binary Shannon entropy in bits, with h(0) = h(1) = 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"binary_entropy requires 0 <= x <= 1, got {x!r}")
    inner = (arr > 0) & (arr < 1)
    safe = np.where(inner, arr, 0.5)
    val = -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe)
    out = np.where(inner, val, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def photon_energy(wavelength_nm: float) -> float:
    """Photon energy in joules at the given vacuum wavelength."""
    from scipy.constants import c, h

    if not (wavelength_nm > 0 and math.isfinite(wavelength_nm)):
        raise ValueError(f"wavelength must be positive, got {wavelength_nm!r}")
    return h * c / (wavelength_nm * 1e-9)
