"""Operating-point optimisation and the intensity-enhancement attack sweep."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._validation import check_positive
from .csvio import records_from_csv, records_to_csv
from .keyrate import (
    ChannelModel,
    DetectorModel,
    ProtocolParams,
    _rate_array,
    arm_transmittance,
    phase_error_bound,
    secret_key_rate,
)


@dataclass(frozen=True)
class OptimizationResult:
    best_eps: float
    best_mu: float
    best_rate: float
    evaluations: int
    converged: bool


@dataclass(frozen=True)
class SweepRow:
    distance_km: float
    rate_expected: float
    rate_actual_aware: float
    rate_oblivious: float
    eps_opt: float
    mu_opt: float


def _rate_at(fixed: ProtocolParams, det, ch, eps: float, mu: float) -> float:
    return secret_key_rate(fixed.with_(send_prob=eps, signal_intensity=mu), det, ch)


def optimize_params(det: DetectorModel, ch: ChannelModel, fixed: ProtocolParams | None = None, *,
                    eps_bounds: tuple[float, float] = (0.01, 0.6),
                    mu_bounds: tuple[float, float] = (0.01, 1.0),
                    grid_size: int = 40, max_evals: int = 200,
                    rtol: float = 1e-6) -> OptimizationResult:
    """Maximise the honest key rate over sending probability and signal intensity.

    A ``grid_size`` x ``grid_size`` grid search seeds a bounded Nelder-Mead
    refinement. The refined point is only accepted if it does not lower the
    rate, and ``best_rate`` is always re-evaluated through
    :func:`secret_key_rate` at the returned point.
    """
    fixed = fixed or ProtocolParams()
    lo_e, hi_e = eps_bounds
    lo_m, hi_m = mu_bounds
    if not (0 < lo_e < hi_e < 1 and 0 < lo_m < hi_m):
        raise ValueError(f"invalid search box eps={eps_bounds}, mu={mu_bounds}")
    e_ph = phase_error_bound(None, fixed, det, ch)
    t = arm_transmittance(ch, det)
    pd, f_e = det.dark_count_prob, fixed.ec_efficiency
    cphi = math.cos(fixed.polarisation_misalignment)

    eps_grid = np.linspace(lo_e, hi_e, grid_size)
    mu_grid = np.linspace(lo_m, hi_m, grid_size)
    E, M = np.meshgrid(eps_grid, mu_grid, indexing="ij")
    rates = _rate_array(E, M, M, t, pd, f_e, e_ph, cphi)
    i, j = np.unravel_index(np.argmax(rates), rates.shape)
    grid_eps, grid_mu = float(eps_grid[i]), float(mu_grid[j])
    grid_rate = _rate_at(fixed, det, ch, grid_eps, grid_mu)

    scale = abs(grid_rate) if grid_rate != 0 else 1.0

    def objective(x):
        return -float(_rate_array(x[0], x[1], x[1], t, pd, f_e, e_ph, cphi)) / scale

    res = minimize(objective, [grid_eps, grid_mu], method="Nelder-Mead",
                   bounds=[eps_bounds, mu_bounds],
                   options={"maxfev": max_evals, "xatol": rtol, "fatol": rtol})
    best_eps, best_mu = float(res.x[0]), float(res.x[1])
    best_rate = _rate_at(fixed, det, ch, best_eps, best_mu)
    if not best_rate >= grid_rate:
        best_eps, best_mu, best_rate = grid_eps, grid_mu, grid_rate
    return OptimizationResult(
        best_eps=best_eps, best_mu=best_mu, best_rate=best_rate,
        evaluations=int(grid_size * grid_size + res.nfev),
        converged=bool(best_rate > 0),
    )


def _sweep_row(distance: float, kappa: float, det, fixed, fiber_loss_coeff, opt_kwargs) -> SweepRow:
    ch = ChannelModel(distance_km=distance, fiber_loss_coeff=fiber_loss_coeff)
    opt = optimize_params(det, ch, fixed, **opt_kwargs)
    honest = fixed.with_(send_prob=opt.best_eps, signal_intensity=opt.best_mu)
    attacked = kappa * opt.best_mu
    return SweepRow(
        distance_km=float(distance),
        rate_expected=opt.best_rate,
        rate_actual_aware=secret_key_rate(honest, det, ch, attacked, attacked),
        rate_oblivious=secret_key_rate(honest, det, ch, opt.best_mu, attacked),
        eps_opt=opt.best_eps,
        mu_opt=opt.best_mu,
    )


def attack_sweep(distances, kappa: float, det: DetectorModel,
                 fixed: ProtocolParams | None = None, *, fiber_loss_coeff: float = 0.2,
                 n_jobs: int = 1, **opt_kwargs) -> list[SweepRow]:
    """Compare honest, attack-aware and attack-oblivious key rates per distance.

    At each distance the honest optimum (eps, mu) is found; the attack scales
    the emitted signal intensity by ``kappa`` while eps is unchanged. The
    aware rate plugs the true intensity into the rate formula, the oblivious
    rate plugs the intended one; both use the statistics of the true intensity.
    """
    check_positive(kappa, "kappa")
    distances = [float(d) for d in distances]
    if any(b < a for a, b in zip(distances, distances[1:])):
        raise ValueError("distances must be sorted ascending")
    fixed = fixed or ProtocolParams()

    def row(d):
        return _sweep_row(d, kappa, det, fixed, fiber_loss_coeff, opt_kwargs)

    if n_jobs == 1:
        return [row(d) for d in distances]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(row, distances))


def sweep_to_csv(rows: list[SweepRow]) -> str:
    return records_to_csv(rows, SweepRow)


def sweep_from_csv(text: str) -> list[SweepRow]:
    return records_from_csv(SweepRow, text)
