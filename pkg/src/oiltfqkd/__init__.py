"""Implementation-security toolkit for injection-locked twin-field QKD transmitters.

Asymptotic SNS key rates and their Monte Carlo oracle, intensity-enhancement
attack sweeps, watchdog detector simulation, and Trojan-wavelength isolation
budgets.
"""
from ._validation import NonDistillableError, OutOfRangeError
from .isolation import (
    BudgetReport,
    ProfileKind,
    SpectralProfile,
    budget_report,
    cascade_isolation,
    lidt_at,
    transparency_gain,
    vulnerable_windows,
)
from .keyrate import (
    ChannelModel,
    DetectorModel,
    ProtocolParams,
    YieldSet,
    compute_yields,
    phase_error_bound,
    secret_key_rate,
    single_photon_yield,
    vacuum_yield,
    x_basis_yields,
    z_basis_yields,
)
from .modulation import (
    LockedLaserResponse,
    ModulationPattern,
    PatternKind,
    Waveform,
    apply_laser_response,
    synthesize_waveform,
)
from .optimize import OptimizationResult, SweepRow, attack_sweep, optimize_params
from .oracle import OracleEstimate, monte_carlo_x_oracle, monte_carlo_z_oracle
from .special import bessel_i0, binary_entropy
from .watchdogs import (
    FastPDModel,
    PowerMeterModel,
    SNSPDModel,
    Spectrum,
    fast_pd_detect,
    optical_spectrum,
    power_meter_readout,
    sideband_monitor,
    snspd_counts,
)

__version__ = "0.1.0"
