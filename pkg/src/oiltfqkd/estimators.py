"""scikit-learn style wrappers.

Key-rate estimators take distances (km) as ``X`` -- a 1-D array or a single
column -- and watchdogs take a :class:`~oiltfqkd.modulation.Waveform` or a
list of them. Watchdogs are fitted on unattacked traces and predict whether
each new trace raises an alarm.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_distances
from .keyrate import ChannelModel, DetectorModel, ProtocolParams, secret_key_rate
from .modulation import LockedLaserResponse, Waveform, apply_laser_response
from .optimize import SweepRow, optimize_params
from .watchdogs import (
    FastPDModel,
    PowerMeterModel,
    fast_pd_detect,
    optical_spectrum,
    power_meter_readout,
    sideband_monitor,
)


def _as_waveforms(X) -> list[Waveform]:
    if isinstance(X, Waveform):
        return [X]
    out = list(X)
    if not out or not all(isinstance(w, Waveform) for w in out):
        raise TypeError("expected a Waveform or a non-empty sequence of Waveforms")
    return out


class KeyRateOptimizer(BaseEstimator):
    """Optimal SNS operating point per distance.

    ``fit`` optimises (eps, mu) at each training distance. ``predict`` returns
    the honest key rate at new distances using the fitted operating-point
    schedule, interpolated linearly in distance and held constant outside it.
    """

    def __init__(self, *, fiber_loss_coeff=0.2, dark_count_prob=1e-8, detector_efficiency=1.0,
                 decoy_intensity=1e-6, ec_efficiency=1.16, phase_misalignment=0.0,
                 polarisation_misalignment=0.0, eps_bounds=(0.01, 0.6), mu_bounds=(0.01, 1.0),
                 grid_size=40, max_evals=200):
        self.fiber_loss_coeff = fiber_loss_coeff
        self.dark_count_prob = dark_count_prob
        self.detector_efficiency = detector_efficiency
        self.decoy_intensity = decoy_intensity
        self.ec_efficiency = ec_efficiency
        self.phase_misalignment = phase_misalignment
        self.polarisation_misalignment = polarisation_misalignment
        self.eps_bounds = eps_bounds
        self.mu_bounds = mu_bounds
        self.grid_size = grid_size
        self.max_evals = max_evals

    def _models(self):
        det = DetectorModel(self.dark_count_prob, self.detector_efficiency)
        fixed = ProtocolParams(decoy_intensity=self.decoy_intensity,
                               ec_efficiency=self.ec_efficiency,
                               phase_misalignment=self.phase_misalignment,
                               polarisation_misalignment=self.polarisation_misalignment)
        return det, fixed

    def _channel(self, d):
        return ChannelModel(distance_km=float(d), fiber_loss_coeff=self.fiber_loss_coeff)

    def fit(self, X, y=None):
        distances = check_distances(X)
        order = np.argsort(distances, kind="stable")
        det, fixed = self._models()
        results = [optimize_params(det, self._channel(d), fixed, eps_bounds=self.eps_bounds,
                                   mu_bounds=self.mu_bounds, grid_size=self.grid_size,
                                   max_evals=self.max_evals) for d in distances[order]]
        self.distances_ = distances[order]
        self.results_ = results
        self.eps_ = np.array([r.best_eps for r in results])
        self.mu_ = np.array([r.best_mu for r in results])
        self.rate_ = np.array([r.best_rate for r in results])
        return self

    def operating_point(self, X):
        """Interpolated (eps, mu) at each distance, shape ``(n, 2)``."""
        check_is_fitted(self, "distances_")
        d = check_distances(X)
        return np.column_stack([np.interp(d, self.distances_, self.eps_),
                                np.interp(d, self.distances_, self.mu_)])

    def _rates(self, X, kappa=1.0):
        det, fixed = self._models()
        out = []
        for d, (eps, mu) in zip(check_distances(X), self.operating_point(X)):
            p = fixed.with_(send_prob=float(eps), signal_intensity=float(mu))
            ch = self._channel(d)
            attacked = kappa * p.signal_intensity
            out.append((d, secret_key_rate(p, det, ch),
                        secret_key_rate(p, det, ch, attacked, attacked),
                        secret_key_rate(p, det, ch, p.signal_intensity, attacked), eps, mu))
        return out

    def predict(self, X):
        return np.array([row[1] for row in self._rates(X)])


class IntensityAttackAnalyzer(KeyRateOptimizer, TransformerMixin):
    """Honest, attack-aware and attack-oblivious key rates under intensity enhancement.

    ``transform`` returns one row per distance with the columns of
    :class:`~oiltfqkd.optimize.SweepRow`; at the training distances it
    reproduces :func:`~oiltfqkd.optimize.attack_sweep` exactly.
    """

    def __init__(self, *, kappa=1.51, fiber_loss_coeff=0.2, dark_count_prob=1e-8,
                 detector_efficiency=1.0, decoy_intensity=1e-6, ec_efficiency=1.16,
                 phase_misalignment=0.0, polarisation_misalignment=0.0,
                 eps_bounds=(0.01, 0.6), mu_bounds=(0.01, 1.0), grid_size=40, max_evals=200):
        super().__init__(fiber_loss_coeff=fiber_loss_coeff, dark_count_prob=dark_count_prob,
                         detector_efficiency=detector_efficiency,
                         decoy_intensity=decoy_intensity, ec_efficiency=ec_efficiency,
                         phase_misalignment=phase_misalignment,
                         polarisation_misalignment=polarisation_misalignment,
                         eps_bounds=eps_bounds, mu_bounds=mu_bounds, grid_size=grid_size,
                         max_evals=max_evals)
        self.kappa = kappa

    def sweep_rows(self, X) -> list[SweepRow]:
        check_is_fitted(self, "distances_")
        return [SweepRow(float(d), e, a, o, float(eps), float(mu))
                for d, e, a, o, eps, mu in self._rates(X, self.kappa)]

    def transform(self, X):
        rows = self.sweep_rows(X)
        return np.array([[r.distance_km, r.rate_expected, r.rate_actual_aware, r.rate_oblivious,
                          r.eps_opt, r.mu_opt] for r in rows])


class LockedLaser(BaseEstimator, TransformerMixin):
    """Transformer from injected waveforms to locked-laser output waveforms."""

    def __init__(self, *, max_amplitude=1.0, peak_at_max=0.51, relaxation_freq=5e9,
                 damping_time=200e-12, chirp_coeff=3.0, output_power=None):
        self.max_amplitude = max_amplitude
        self.peak_at_max = peak_at_max
        self.relaxation_freq = relaxation_freq
        self.damping_time = damping_time
        self.chirp_coeff = chirp_coeff
        self.output_power = output_power

    def response(self) -> LockedLaserResponse:
        return LockedLaserResponse(**self.get_params())

    def fit(self, X=None, y=None):
        self.response_ = self.response()
        return self

    def transform(self, X):
        resp = getattr(self, "response_", None) or self.response()
        return [apply_laser_response(w, resp) for w in _as_waveforms(X)]


class PowerMeterWatchdog(BaseEstimator):
    """Slow integrating power meter; alarms on a mean shift beyond ``n_sigma`` standard errors."""

    def __init__(self, *, integration_time=25e-6, noise_rel_std=1e-3, windows=100_000,
                 n_sigma=3.0, random_state=0):
        self.integration_time = integration_time
        self.noise_rel_std = noise_rel_std
        self.windows = windows
        self.n_sigma = n_sigma
        self.random_state = random_state

    def fit(self, X, y=None):
        self.reference_ = _as_waveforms(X)[0]
        self.model_ = PowerMeterModel(self.integration_time, self.noise_rel_std)
        return self

    def score_samples(self, X):
        """Rows of ``(mean_deviation, std_ratio, mean_deviation_stderr)``."""
        check_is_fitted(self, "reference_")
        return np.array([tuple(power_meter_readout(w, self.model_, self.windows,
                                                   self.random_state, self.reference_))
                         for w in _as_waveforms(X)])

    def predict(self, X):
        s = self.score_samples(X)
        return np.abs(s[:, 0]) > self.n_sigma * s[:, 2]


class FastPDWatchdog(BaseEstimator):
    """GHz photodiode; alarms when the filtered peak-to-peak exceeds the fitted quiet level."""

    def __init__(self, *, bandwidth=1e9, sampling_rate=20e9, detection_threshold=5.0,
                 noise_floor_rel=1e-3, order=1):
        self.bandwidth = bandwidth
        self.sampling_rate = sampling_rate
        self.detection_threshold = detection_threshold
        self.noise_floor_rel = noise_floor_rel
        self.order = order

    def fit(self, X, y=None):
        self.model_ = FastPDModel(**self.get_params())
        quiet = [max(fast_pd_detect(w, self.model_).peak_to_peak,
                     self.noise_floor_rel * w.mean_power) for w in _as_waveforms(X)]
        self.quiet_peak_to_peak_ = float(max(quiet))
        return self

    def score_samples(self, X):
        check_is_fitted(self, "quiet_peak_to_peak_")
        return np.array([fast_pd_detect(w, self.model_).peak_to_peak for w in _as_waveforms(X)])

    def predict(self, X):
        return self.score_samples(X) > self.detection_threshold * self.quiet_peak_to_peak_


class SidebandWatchdog(BaseEstimator):
    """Narrowband filter plus slow power meter watching for modulation sidebands."""

    def __init__(self, *, reject_halfwidth=0.5e9, chirp_coeff=3.0, threshold_rel=1e-6):
        self.reject_halfwidth = reject_halfwidth
        self.chirp_coeff = chirp_coeff
        self.threshold_rel = threshold_rel

    def _power(self, w):
        spec = optical_spectrum(w, LockedLaserResponse(chirp_coeff=self.chirp_coeff))
        return sideband_monitor(spec, self.reject_halfwidth), spec.total_power

    def fit(self, X, y=None):
        self.reference_power_ = max(self._power(w)[0] for w in _as_waveforms(X))
        return self

    def score_samples(self, X):
        check_is_fitted(self, "reference_power_")
        return np.array([self._power(w)[0] for w in _as_waveforms(X)])

    def predict(self, X):
        check_is_fitted(self, "reference_power_")
        out = []
        for w in _as_waveforms(X):
            power, total = self._power(w)
            out.append(power > self.reference_power_ + self.threshold_rel * total)
        return np.array(out)
