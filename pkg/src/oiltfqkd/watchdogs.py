"""Watchdog detector models: slow power meter, fast photodiode, SNSPD and sideband monitor."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from ._validation import check_in_interval, check_positive
from .csvio import format_rows
from .modulation import LockedLaserResponse, Waveform
from .special import photon_energy


@dataclass(frozen=True)
class PowerMeterModel:
    integration_time: float = 25e-6
    noise_rel_std: float = 1e-3

    def __post_init__(self):
        check_positive(self.integration_time, "integration_time", "PowerMeterModel")
        check_positive(self.noise_rel_std, "noise_rel_std", "PowerMeterModel", allow_zero=True)


@dataclass(frozen=True)
class FastPDModel:
    """GHz photodiode watchdog.

    ``noise_floor_rel`` is the peak-to-peak of the unmodulated trace (electronic
    noise) relative to the mean power; an alarm needs a peak-to-peak above
    ``detection_threshold`` times that floor.
    """

    bandwidth: float = 1e9
    sampling_rate: float = 20e9
    detection_threshold: float = 5.0
    noise_floor_rel: float = 1e-3
    order: int = 1

    def __post_init__(self):
        o = "FastPDModel"
        check_positive(self.bandwidth, "bandwidth", o)
        check_positive(self.sampling_rate, "sampling_rate", o)
        check_positive(self.detection_threshold, "detection_threshold", o)
        check_positive(self.noise_floor_rel, "noise_floor_rel", o)
        if self.bandwidth > self.sampling_rate / 2:
            raise ValueError(f"{o}.bandwidth must not exceed sampling_rate / 2")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"{o}.order must be a positive integer")


@dataclass(frozen=True)
class SNSPDModel:
    detection_efficiency: float = 0.9
    bin_width: float = 10e-12
    attenuation_to_single_photon: float = 60.0  # dB
    optical_wavelength: float = 1550.0  # nm

    def __post_init__(self):
        o = "SNSPDModel"
        check_in_interval(self.detection_efficiency, "detection_efficiency", 0.0, 1.0,
                          closed_low=False, owner=o)
        check_positive(self.bin_width, "bin_width", o)
        check_positive(self.attenuation_to_single_photon, "attenuation_to_single_photon", o,
                       allow_zero=True)
        check_positive(self.optical_wavelength, "optical_wavelength", o)

    def photons_per_joule(self) -> float:
        return (10 ** (-self.attenuation_to_single_photon / 10)
                / photon_energy(self.optical_wavelength) * self.detection_efficiency)


# -- slow power meter --------------------------------------------------------

class PowerMeterReading(NamedTuple):
    mean_deviation: float
    std_ratio: float
    mean_deviation_stderr: float

    @property
    def detected(self) -> bool:
        return abs(self.mean_deviation) > 3 * self.mean_deviation_stderr


def _window_means(samples: np.ndarray, per_window: int, windows: int) -> np.ndarray:
    n = samples.size
    csum = np.concatenate([[0.0], np.cumsum(np.concatenate([samples, samples]))])
    total = csum[n]
    starts = (np.arange(windows, dtype=np.int64) * per_window) % n
    full, rem = divmod(per_window, n)
    sums = full * total + (csum[starts + rem] - csum[starts])
    return sums / per_window


def power_meter_readout(w: Waveform, pm: PowerMeterModel, windows: int = 100_000,
                        seed: int = 0, reference: Waveform | None = None) -> PowerMeterReading:
    """Simulate consecutive power-meter windows over the periodically tiled waveform.

    Readings are window averages plus Gaussian noise of relative standard
    deviation ``pm.noise_rel_std``. The same meter is run over the unmodulated
    ``reference`` (a flat trace at the waveform's reference level by default)
    on an independent substream; the result is the normalised mean deviation,
    the ratio of reading spreads and the standard error of the deviation.
    """
    windows = int(windows)
    if windows < 2:
        raise ValueError("need at least two power-meter windows")
    per_window = round(pm.integration_time * w.sample_rate)
    if per_window < 1:
        raise ValueError("integration window is shorter than one sample")
    if reference is None:
        reference = Waveform(np.full(1, w.reference_level()), w.sample_rate)
    ref_mean_true = reference.mean_power
    sigma = pm.noise_rel_std * ref_mean_true
    rng_att, rng_ref = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    att = _window_means(w.samples, per_window, windows) + rng_att.normal(0.0, sigma, windows)
    ref = _window_means(reference.samples, per_window, windows) + rng_ref.normal(0.0, sigma, windows)
    ref_mean = float(ref.mean())
    dev = (float(att.mean()) - ref_mean) / ref_mean
    stderr = math.sqrt(att.var(ddof=1) / windows + ref.var(ddof=1) / windows) / ref_mean
    ref_std = float(ref.std(ddof=1))
    ratio = float(att.std(ddof=1)) / ref_std if ref_std > 0 else math.nan
    return PowerMeterReading(dev, ratio, stderr)


# -- fast photodiode ---------------------------------------------------------

class FastPDResult(NamedTuple):
    filtered_trace: Waveform
    detected: bool
    peak_to_peak: float


def _periodic_lowpass(x: np.ndarray, cutoff: float, sample_rate: float) -> np.ndarray:
    a = -math.expm1(-2 * math.pi * cutoff / sample_rate)
    b, den = [a], [1.0, -(1.0 - a)]
    # steady-state start value for a periodic input: y0 = C / (1 - (1-a)^N)
    once, _ = lfilter(b, den, x, zi=[0.0])
    decay = (1.0 - a) ** x.size
    y0 = once[-1] / (1.0 - decay)
    y, _ = lfilter(b, den, x, zi=[(1.0 - a) * y0])
    return y


def fast_pd_detect(w: Waveform, pd: FastPDModel) -> FastPDResult:
    """Low-pass filter at the photodiode bandwidth, resample, and test the peak-to-peak."""
    if w.sample_rate < pd.sampling_rate:
        raise ValueError("waveform sample rate is below the photodiode sampling rate")
    y = w.samples.astype(float)
    for _ in range(int(pd.order)):
        y = _periodic_lowpass(y, pd.bandwidth, w.sample_rate)
    t_out = np.arange(math.floor(w.duration * pd.sampling_rate)) / pd.sampling_rate
    trace = np.interp(t_out, w.times, y, period=w.duration) if t_out.size else y[:1]
    trace = np.clip(trace, 0.0, None)
    p2p = float(np.ptp(trace))
    floor = pd.noise_floor_rel * w.mean_power
    detected = p2p > pd.detection_threshold * floor
    return FastPDResult(Waveform(trace, pd.sampling_rate), bool(detected), p2p)


# -- SNSPD with time tagger ---------------------------------------------------

class SNSPDTrace(NamedTuple):
    bin_start_s: np.ndarray
    expected_counts: np.ndarray
    counts: np.ndarray
    mean_photons: np.ndarray
    relative_peak: float
    relative_peak_stderr: float


def snspd_counts(w: Waveform, sn: SNSPDModel, seed: int = 0, repetitions: int = 1) -> SNSPDTrace:
    """Time-tagged SNSPD histogram accumulated over ``repetitions`` of the waveform.

    Counts per bin are Poisson with mean equal to the attenuated photon flux
    integrated over the bin. ``mean_photons`` is the per-repetition mean photon
    number arriving in each bin (efficiency removed). The relative peak is the
    largest bin over the median bin, minus one.
    """
    if not sn.bin_width > 0:
        raise ValueError("SNSPDModel.bin_width must be positive")
    per_bin = sn.bin_width * w.sample_rate
    if per_bin < 1:
        raise ValueError("bin width is shorter than the waveform sample spacing")
    idx = np.floor(np.arange(len(w)) / per_bin).astype(int)
    energy = np.bincount(idx, weights=w.samples / w.sample_rate)
    expected = energy * sn.photons_per_joule() * int(repetitions)
    counts = np.random.default_rng(seed).poisson(expected)
    mean_photons = counts / (sn.detection_efficiency * int(repetitions))
    base = float(np.median(counts))
    top = float(np.max(counts))
    if base > 0:
        rel = top / base - 1.0
        rel_err = (top / base) * math.sqrt(1.0 / max(top, 1.0) + 1.0 / base)
    else:
        rel, rel_err = (0.0 if top == 0 else math.inf), math.nan
    starts = np.arange(energy.size) * sn.bin_width
    return SNSPDTrace(starts, expected, counts, mean_photons, rel, rel_err)


# -- optical spectrum and sideband filter --------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    freq_offset_hz: np.ndarray
    power_w: np.ndarray

    @property
    def total_power(self) -> float:
        return float(np.sum(self.power_w))

    def to_csv(self) -> str:
        return format_rows(["freq_offset_hz", "power_w"],
                           zip(self.freq_offset_hz.tolist(), self.power_w.tolist()))

    @classmethod
    def from_csv(cls, text: str) -> "Spectrum":
        data = np.loadtxt(text.splitlines(), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def optical_spectrum(w: Waveform, resp: LockedLaserResponse, *,
                     min_resolution_hz: float | None = None) -> Spectrum:
    """Power spectrum of the chirped optical field of a (periodic) power trace.

    The instantaneous phase follows ``dphi/dt = (chirp/2) d(ln P)/dt``, i.e.
    ``phi = (chirp/2) ln(P / P_ref)``. The spectrum is normalised so its sum
    equals the mean optical power.
    """
    n = len(w)
    if min_resolution_hz is not None and w.sample_rate / n > min_resolution_hz:
        raise ValueError(
            f"record gives {w.sample_rate / n:g} Hz resolution, coarser than {min_resolution_hz:g} Hz")
    ref = w.reference_level()
    floor = 1e-15 * (ref if ref > 0 else max(w.mean_power, 1e-300))
    power = np.maximum(w.samples, floor)
    phase = 0.5 * resp.chirp_coeff * np.log(power / max(ref, floor))
    field_ = np.sqrt(power) * np.exp(1j * phase)
    spec = np.abs(np.fft.fft(field_)) ** 2 / n**2
    freqs = np.fft.fftfreq(n, d=1.0 / w.sample_rate)
    return Spectrum(np.fft.fftshift(freqs), np.fft.fftshift(spec))


def sideband_monitor(spectrum: Spectrum, passband_reject_halfwidth: float,
                     pm: PowerMeterModel | None = None) -> float:
    """Power (W) rerouted by a narrowband filter away from the carrier.

    Everything outside ``|f| <= passband_reject_halfwidth`` reaches the slow
    power meter. The modulation is periodic and far faster than any
    integration window, so the meter reads the stationary spectral power;
    ``pm`` is accepted for symmetry with the other watchdogs.
    """
    check_positive(passband_reject_halfwidth, "passband_reject_halfwidth", allow_zero=True)
    outside = np.abs(spectrum.freq_offset_hz) > passband_reject_halfwidth
    return float(np.sum(spectrum.power_w[outside]))
