"""Eve's reference-intensity modulation and a phenomenological locked-laser response.

Waveforms are treated as one period of a periodic signal: every consumer
(laser response, detectors, spectra) wraps around the end of the record.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_in_interval, check_positive
from .csvio import format_rows


class PatternKind(str, enum.Enum):
    UP = "Up"
    DOWN = "Down"
    UP_TO_DOWN = "UpToDown"
    DOWN_TO_UP = "DownToUp"

    @property
    def paired(self) -> bool:
        return self in (PatternKind.UP_TO_DOWN, PatternKind.DOWN_TO_UP)


@dataclass(frozen=True)
class ModulationPattern:
    """Rectangular modulation recipe.

    ``height`` is the lobe height as a fraction of ``baseline_power``; lobes
    of width ``width`` start at the beginning of each ``period``.
    """

    kind: PatternKind = PatternKind.UP_TO_DOWN
    height: float = 0.5
    width: float = 50e-12
    period: float = 1e-9
    baseline_power: float = 1e-3

    def __post_init__(self):
        o = "ModulationPattern"
        object.__setattr__(self, "kind", PatternKind(self.kind))
        check_positive(self.height, "height", o, allow_zero=True)
        if self.kind is not PatternKind.UP:
            check_in_interval(self.height, "height", 0.0, 1.0, owner=o)
        check_positive(self.width, "width", o)
        check_positive(self.period, "period", o)
        check_positive(self.baseline_power, "baseline_power", o)
        lobes = 2 if self.kind.paired else 1
        if not self.period > lobes * self.width:
            raise ValueError(
                f"{o}.period must exceed {lobes} x width for {self.kind.value} patterns, "
                f"got period={self.period!r}, width={self.width!r}")

    @property
    def peak_to_peak(self) -> float:
        """Normalised peak-to-peak modulation (fraction of baseline)."""
        return 2 * self.height if self.kind.paired else self.height


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled optical power (W), one period of a periodic record."""

    samples: np.ndarray
    sample_rate: float
    baseline: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("Waveform.samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Waveform.samples must be finite")
        if np.any(arr < 0):
            raise ValueError("Waveform.samples must be non-negative (optical power)")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        check_positive(self.sample_rate, "sample_rate", "Waveform")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.samples))

    def reference_level(self) -> float:
        """Unmodulated power level: the stored baseline, else the median sample."""
        return float(self.baseline) if self.baseline is not None else float(np.median(self.samples))

    def to_csv(self) -> str:
        return format_rows(["time_s", "power_w"], zip(self.times.tolist(), self.samples.tolist()))

    @classmethod
    def from_csv(cls, text: str) -> "Waveform":
        data = np.loadtxt(text.splitlines(), delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] < 2:
            raise ValueError("need at least two samples to recover the sample rate")
        rate = (data.shape[0] - 1) / (data[-1, 0] - data[0, 0])
        return cls(data[:, 1], float(f"{rate:.12g}"))


def _whole_samples(value: float, name: str) -> int:
    n = round(value)
    if n < 1 or abs(value - n) > 1e-6 * max(1.0, value):
        raise ValueError(f"{name} must be a whole number of samples, got {value!r}")
    return int(n)


def synthesize_waveform(pat: ModulationPattern, duration: float, sample_rate: float) -> Waveform:
    """Sample a rectangular modulation pattern.

    ``width`` and ``period`` must be whole numbers of samples and each lobe
    needs at least 10 samples. The record holds ``round(duration * sample_rate)``
    samples starting at the first lobe.
    """
    check_positive(duration, "duration")
    check_positive(sample_rate, "sample_rate")
    lobe = _whole_samples(pat.width * sample_rate, "width x sample_rate")
    if lobe < 10:
        raise ValueError(
            f"width {pat.width!r} s spans {lobe} samples at {sample_rate:g} Hz; need >= 10")
    per = _whole_samples(pat.period * sample_rate, "period x sample_rate")
    n = max(1, round(duration * sample_rate))

    dev = np.zeros(per)
    h = pat.height
    if pat.kind is PatternKind.UP:
        dev[:lobe] = h
    elif pat.kind is PatternKind.DOWN:
        dev[:lobe] = -h
    elif pat.kind is PatternKind.UP_TO_DOWN:
        dev[:lobe] = h
        dev[lobe:2 * lobe] = -h
    else:
        dev[:lobe] = -h
        dev[lobe:2 * lobe] = h
    reps = -(-n // per)
    samples = pat.baseline_power * (1.0 + np.tile(dev, reps)[:n])
    return Waveform(np.clip(samples, 0.0, None), sample_rate, baseline=pat.baseline_power)


@dataclass(frozen=True)
class LockedLaserResponse:
    """Phenomenological output of an injection-locked laser under modulated injection.

    Any excursion of the injected power, up or down, perturbs the lock; the
    laser answers the rectified deviation through a damped relaxation
    oscillation that dips first and then overshoots. The kernel has zero net
    area, so the average output power is unchanged.

    The gain map is linear and calibrated so that an input peak-to-peak of
    ``max_amplitude`` (fraction of baseline) drives the output peak to
    ``peak_at_max`` above its baseline.
    """

    max_amplitude: float = 1.0
    peak_at_max: float = 0.51
    relaxation_freq: float = 5e9
    damping_time: float = 200e-12
    chirp_coeff: float = 3.0
    output_power: float | None = None
    kernel_span: float = field(default=10.0)  # kernel length in damping times

    def __post_init__(self):
        o = "LockedLaserResponse"
        check_positive(self.max_amplitude, "max_amplitude", o)
        check_positive(self.peak_at_max, "peak_at_max", o, allow_zero=True)
        check_positive(self.relaxation_freq, "relaxation_freq", o)
        check_positive(self.damping_time, "damping_time", o)
        check_positive(self.kernel_span, "kernel_span", o)
        if self.output_power is not None:
            check_positive(self.output_power, "output_power", o)

    def gain_map(self, amplitude):
        """Output peak excursion (fraction of baseline) for an input peak-to-peak amplitude."""
        return self.peak_at_max * np.asarray(amplitude, dtype=float) / self.max_amplitude

    def impulse_shape(self, sample_rate: float) -> np.ndarray:
        """Sampled ringing kernel, zero-sum, peak magnitude 1."""
        omega = 2 * math.pi * self.relaxation_freq
        tau = self.damping_time
        t = np.arange(max(2, round(self.kernel_span * tau * sample_rate))) / sample_rate
        # phase offset makes the continuous kernel integrate to zero; dip first
        k = np.exp(-t / tau) * np.sin(omega * t - math.atan(omega * tau))
        k -= k.mean()
        return k / np.max(np.abs(k))


def _circular_convolve(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n = x.size
    folded = np.zeros(n)
    np.add.at(folded, np.arange(kernel.size) % n, kernel)
    return np.fft.irfft(np.fft.rfft(x) * np.fft.rfft(folded), n)


def apply_laser_response(inj: Waveform, resp: LockedLaserResponse) -> Waveform:
    """Locked-laser output power for an injected (periodic) waveform."""
    level = inj.reference_level()
    out_base = resp.output_power if resp.output_power is not None else level
    if level <= 0:
        raise ValueError("injected waveform has no unmodulated power level")
    dev = inj.samples / level - 1.0
    amplitude = float(np.ptp(dev))
    if amplitude == 0.0:
        return Waveform(np.full(len(inj), out_base), inj.sample_rate, baseline=out_base)
    shaped = _circular_convolve(np.abs(dev), resp.impulse_shape(inj.sample_rate))
    peak = float(np.max(shaped))
    if peak <= 0:
        peak = float(np.max(np.abs(shaped)))
    out = out_base * (1.0 + float(resp.gain_map(amplitude)) * shaped / peak)
    return Waveform(np.clip(out, 0.0, None), inj.sample_rate, baseline=out_base)
