"""Asymptotic Sending-or-Not-Sending twin-field QKD statistics and key rate.

Symmetric channel: each party reaches the central node through a fibre of
transmittance ``t = sqrt(eta)``. Detector efficiency multiplies ``t`` (it is
applied once per arm, never on top of an efficiency already folded into the
fibre loss). Every formula is written with ``expm1`` so that the tiny yields
met at long distance keep full relative precision.

Undefined QBERs (zero yield) are reported as ``nan``, never as 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._validation import (
    NonDistillableError,
    check_in_interval,
    check_positive,
    collect_violations,
)
from .special import bessel_i0, binary_entropy

DEFAULT_DECOY_INTENSITY = 1e-6
DEFAULT_EC_EFFICIENCY = 1.16


@dataclass(frozen=True)
class ChannelModel:
    """Fibre channel between Alice and Bob; the central node sits halfway."""

    distance_km: float = 0.0
    fiber_loss_coeff: float = 0.2  # dB/km

    def __post_init__(self):
        check_positive(self.distance_km, "distance_km", "ChannelModel", allow_zero=True)
        check_positive(self.fiber_loss_coeff, "fiber_loss_coeff", "ChannelModel", allow_zero=True)

    @property
    def total_transmittance(self) -> float:
        return 10.0 ** (-self.fiber_loss_coeff * self.distance_km / 10.0)

    @property
    def half_link_transmittance(self) -> float:
        return math.sqrt(self.total_transmittance)


@dataclass(frozen=True)
class DetectorModel:
    dark_count_prob: float = 1e-8
    efficiency: float = 1.0

    def __post_init__(self):
        check_in_interval(self.dark_count_prob, "dark_count_prob", 0.0, 1.0,
                          closed_high=False, owner="DetectorModel")
        check_in_interval(self.efficiency, "efficiency", 0.0, 1.0,
                          closed_low=False, owner="DetectorModel")


@dataclass(frozen=True)
class ProtocolParams:
    """SNS protocol settings.

    Construction only enforces what the formulas need to be evaluable
    (probabilities in [0, 1], non-negative intensities). :meth:`violations`
    applies the stricter operating-point invariants used by config validation.
    """

    send_prob: float = 0.1
    signal_intensity: float = 0.4
    decoy_intensity: float = DEFAULT_DECOY_INTENSITY
    key_basis_prob: float = 1.0
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY
    phase_misalignment: float = 0.0
    polarisation_misalignment: float = 0.0
    enhancement_factor: float = 1.0

    def __post_init__(self):
        check_in_interval(self.send_prob, "send_prob", 0.0, 1.0, owner="ProtocolParams")
        check_positive(self.signal_intensity, "signal_intensity", "ProtocolParams", allow_zero=True)
        check_positive(self.decoy_intensity, "decoy_intensity", "ProtocolParams", allow_zero=True)
        check_in_interval(self.key_basis_prob, "key_basis_prob", 0.0, 1.0,
                          closed_low=False, owner="ProtocolParams")
        check_positive(self.ec_efficiency, "ec_efficiency", "ProtocolParams")
        check_in_interval(self.phase_misalignment, "phase_misalignment", -math.pi, math.pi,
                          owner="ProtocolParams")
        check_in_interval(self.polarisation_misalignment, "polarisation_misalignment",
                          -math.pi, math.pi, owner="ProtocolParams")
        check_positive(self.enhancement_factor, "enhancement_factor", "ProtocolParams")

    @property
    def attacked_intensity(self) -> float:
        """Signal intensity actually emitted under an intensity-enhancement attack."""
        return self.enhancement_factor * self.signal_intensity

    def violations(self) -> list[str]:
        o = "ProtocolParams"
        return collect_violations([
            lambda: check_in_interval(self.send_prob, "send_prob", 0.0, 1.0,
                                      closed_low=False, closed_high=False, owner=o),
            lambda: check_positive(self.signal_intensity, "signal_intensity", o),
            lambda: check_positive(self.decoy_intensity, "decoy_intensity", o),
            lambda: check_in_interval(self.decoy_intensity, "decoy_intensity", 0.0,
                                      self.signal_intensity, closed_low=False,
                                      closed_high=False, owner=o),
            lambda: check_in_interval(self.key_basis_prob, "key_basis_prob", 1.0, 1.0, owner=o),
            lambda: check_in_interval(self.ec_efficiency, "ec_efficiency", 1.0, math.inf, owner=o),
            lambda: check_positive(self.enhancement_factor, "enhancement_factor", o),
        ])

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class YieldSet:
    s0: float
    s1: float
    sz_corr: float
    sz_err: float
    sz: float
    ez: float
    sx_corr: float
    sx_err: float
    sx: float
    ex: float
    e_ph_bound: float
    e_ph_raw: float = field(default=math.nan)

    @property
    def e_ph_clamped(self) -> bool:
        return not (0.0 <= self.e_ph_raw <= 1.0)

    def as_dict(self) -> dict:
        return asdict(self)


def arm_transmittance(ch: ChannelModel, det: DetectorModel) -> float:
    """Transmittance from one party to a click at the central node."""
    return ch.half_link_transmittance * det.efficiency


# Array kernels. Arguments broadcast; used directly by the optimizer grid.

def _sz_terms(eps, mu, t, pd, cos_phi):
    eps = np.asarray(eps, dtype=float)
    mt = np.asarray(mu, dtype=float) * t
    corr = 4 * eps * (1 - eps) * (1 - pd) * np.exp(-mt) * (pd + np.expm1(mt / 2))
    both = np.expm1(mt) + np.exp(mt) * (bessel_i0(mt * cos_phi) - 1.0)
    err = (2 * eps**2 * (1 - pd) * np.exp(-2 * mt) * (pd + both)
           + 2 * (1 - eps) ** 2 * pd * (1 - pd))
    return corr, err


def _sx_terms(nu, t, pd, cos_phi, cos_theta):
    nt = nu * t
    c = cos_phi * cos_theta
    base = (1 - pd) * np.exp(-2 * nt)
    corr = base * (np.expm1(nt * (1 + c)) + pd)
    err = base * (np.expm1(nt * (1 - c)) + pd)
    return corr, err


def _s0(pd):
    return 2 * pd * (1 - pd)


def _s1(pd, t):
    return 2 * (1 - pd) * (pd * (1 - t) + t / 2)


def _phase_error_raw(nu, t, pd, cos_phi, cos_theta):
    if not nu > 0:
        raise ValueError("phase error bound needs a positive decoy intensity")
    s1 = _s1(pd, t)
    if s1 <= 0:
        raise NonDistillableError("single-photon yield is zero; phase error bound undefined")
    nt = nu * t
    c = cos_phi * cos_theta
    # S_x E_x - s0 e^{-2 nu} / 2, regrouped to avoid cancellation
    num = (1 - pd) * (np.exp(-2 * nt) * np.expm1(nt * (1 - c))
                      + pd * np.exp(-2 * nt) * -np.expm1(-2 * nu * (1 - t)))
    return float(num / (2 * nu * math.exp(-2 * nu) * s1))


def _rate_array(eps, mu_formula, mu_stats, t, pd, f_e, e_ph, cos_phi):
    s1 = _s1(pd, t)
    corr, err = _sz_terms(eps, mu_stats, t, pd, cos_phi)
    sz = corr + err
    with np.errstate(invalid="ignore", divide="ignore"):
        ez = np.where(sz > 0, err / np.where(sz > 0, sz, 1.0), 0.0)
    # S_z h(E_z) -> 0 as S_z -> 0 since h is bounded
    leak = f_e * sz * binary_entropy(np.clip(ez, 0.0, 1.0))
    mu_f = np.asarray(mu_formula, dtype=float)
    eps = np.asarray(eps, dtype=float)
    return 2 * eps * (1 - eps) * mu_f * np.exp(-mu_f) * s1 * (1 - binary_entropy(e_ph)) - leak


def vacuum_yield(det: DetectorModel) -> float:
    return float(_s0(det.dark_count_prob))


def single_photon_yield(det: DetectorModel, ch: ChannelModel) -> float:
    return float(_s1(det.dark_count_prob, arm_transmittance(ch, det)))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def z_basis_yields(p: ProtocolParams, det: DetectorModel, ch: ChannelModel,
                   intensity: float | None = None) -> tuple[float, float, float, float]:
    """Key-basis yields ``(sz_corr, sz_err, sz, ez)``.

    ``intensity`` overrides ``p.signal_intensity``; pass ``p.attacked_intensity``
    for the statistics observed under attack. ``ez`` is ``nan`` when ``sz == 0``.
    """
    mu = p.signal_intensity if intensity is None else check_positive(
        intensity, "intensity", allow_zero=True)
    corr, err = _sz_terms(p.send_prob, mu, arm_transmittance(ch, det),
                          det.dark_count_prob, math.cos(p.polarisation_misalignment))
    corr, err = float(corr), float(err)
    sz = corr + err
    return corr, err, sz, _ratio(err, sz)


def x_basis_yields(p: ProtocolParams, det: DetectorModel,
                   ch: ChannelModel) -> tuple[float, float, float, float]:
    """Decoy-window yields ``(sx_corr, sx_err, sx, ex)`` at ``p.decoy_intensity``."""
    corr, err = _sx_terms(p.decoy_intensity, arm_transmittance(ch, det), det.dark_count_prob,
                          math.cos(p.polarisation_misalignment), math.cos(p.phase_misalignment))
    corr, err = float(corr), float(err)
    sx = corr + err
    return corr, err, sx, _ratio(err, sx)


def phase_error_bound(yields: YieldSet | None, p: ProtocolParams, det: DetectorModel,
                      ch: ChannelModel, *, raw: bool = False) -> float:
    """Upper bound on the phase error rate from the decoy-window statistics.

    The value is clamped to [0, 1] unless ``raw`` is set. ``yields`` is
    accepted for call-site symmetry; the bound is recomputed from the
    parameters in a cancellation-free form.

    Raises
    ------
    NonDistillableError
        If the single-photon yield is zero.
    """
    value = _phase_error_raw(p.decoy_intensity, arm_transmittance(ch, det), det.dark_count_prob,
                             math.cos(p.polarisation_misalignment),
                             math.cos(p.phase_misalignment))
    if raw:
        return value
    return min(max(value, 0.0), 1.0)


def compute_yields(p: ProtocolParams, det: DetectorModel, ch: ChannelModel,
                   intensity: float | None = None) -> YieldSet:
    szc, sze, sz, ez = z_basis_yields(p, det, ch, intensity)
    sxc, sxe, sx, ex = x_basis_yields(p, det, ch)
    raw = phase_error_bound(None, p, det, ch, raw=True)
    return YieldSet(
        s0=vacuum_yield(det), s1=single_photon_yield(det, ch),
        sz_corr=szc, sz_err=sze, sz=sz, ez=ez,
        sx_corr=sxc, sx_err=sxe, sx=sx, ex=ex,
        e_ph_bound=min(max(raw, 0.0), 1.0), e_ph_raw=raw,
    )


def secret_key_rate(p: ProtocolParams, det: DetectorModel, ch: ChannelModel,
                    intensity_used_in_formula: float | None = None,
                    statistics_from_intensity: float | None = None) -> float:
    """Asymptotic SNS secret key rate per round (may be negative).

    The two intensities are kept separate: ``intensity_used_in_formula`` enters
    the prefactor and single-photon Poisson weight, while
    ``statistics_from_intensity`` generates the observed key-basis yield and
    QBER. Both default to ``p.signal_intensity``.
    """
    mu_f = p.signal_intensity if intensity_used_in_formula is None else intensity_used_in_formula
    mu_s = p.signal_intensity if statistics_from_intensity is None else statistics_from_intensity
    check_positive(mu_f, "intensity_used_in_formula", allow_zero=True)
    check_positive(mu_s, "statistics_from_intensity", allow_zero=True)
    e_ph = phase_error_bound(None, p, det, ch)
    t = arm_transmittance(ch, det)
    return float(_rate_array(p.send_prob, mu_f, mu_s, t, det.dark_count_prob,
                             p.ec_efficiency, e_ph, math.cos(p.polarisation_misalignment)))
