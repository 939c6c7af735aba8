"""Primary acceptance criteria, one test each, evaluated at the stated tolerances.

Every test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured values.
"""
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from oiltfqkd import (
    ChannelModel,
    DetectorModel,
    FastPDModel,
    LockedLaserResponse,
    ModulationPattern,
    PowerMeterModel,
    ProtocolParams,
    SNSPDModel,
    apply_laser_response,
    attack_sweep,
    fast_pd_detect,
    lidt_at,
    monte_carlo_x_oracle,
    monte_carlo_z_oracle,
    optical_spectrum,
    optimize_params,
    power_meter_readout,
    sideband_monitor,
    snspd_counts,
    synthesize_waveform,
    x_basis_yields,
    z_basis_yields,
)
from oiltfqkd.isolation import required_isolation_db

RATE = 200e9
RESP = LockedLaserResponse()
BASE = 1e-3


def _within(est, exact, stderr):
    return abs(est - exact) <= 3 * stderr


def test_oracle_equivalence(acceptance):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    passed, notes = 0, []
    for i in range(20):
        eps, mu = rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.8)
        L, pd = rng.uniform(0.0, 300.0), float(rng.choice([0.0, 1e-8, 1e-6]))
        # decoy window probed at the tuple's intensity so 1e7 rounds resolve it
        p = ProtocolParams(send_prob=eps, signal_intensity=mu, decoy_intensity=mu)
        det, ch = DetectorModel(pd), ChannelModel(L)
        z = monte_carlo_z_oracle(p, det, ch, rounds=10_000_000, seed=2 * i)
        x = monte_carlo_x_oracle(p, det, ch, rounds=10_000_000, seed=2 * i + 1)
        zc, ze, _, _ = z_basis_yields(p, det, ch)
        xc, xe, _, _ = x_basis_yields(p, det, ch)
        ok = (_within(z.corr, zc, z.corr_stderr) and _within(z.err, ze, z.err_stderr)
              and _within(x.corr, xc, x.corr_stderr) and _within(x.err, xe, x.err_stderr))
        passed += ok
        if not ok:
            notes.append(f"tuple {i} (eps={eps:.3f}, mu={mu:.3f}, L={L:.1f}, pd={pd:g})")
    elapsed = time.perf_counter() - start
    ok = passed >= 19 and elapsed < 300
    acceptance("oracle equivalence", ok,
               f"{passed}/20 tuples within 3 sigma in {elapsed:.0f} s"
               + (f"; outside: {', '.join(notes)}" if notes else ""))
    assert ok


def test_overestimation_ordering(acceptance):
    distances = np.arange(0.0, 501.0, 10.0)
    det = DetectorModel(1e-8)
    start = time.perf_counter()
    attacked = attack_sweep(distances, 1.51, det)
    honest = attack_sweep(distances, 1.0, det)
    elapsed = time.perf_counter() - start
    checked = [r for r in attacked if r.rate_oblivious > 1e-12 and r.rate_actual_aware > 1e-12]
    bad = [r.distance_km for r in checked if not r.rate_oblivious > r.rate_actual_aware]
    bitwise = all(r.rate_expected == r.rate_actual_aware == r.rate_oblivious for r in honest)
    ok = not bad and bitwise and elapsed < 120
    worst = max(checked, key=lambda r: r.rate_actual_aware - r.rate_oblivious, default=None)
    detail = (f"oblivious > aware at {len(checked) - len(bad)}/{len(checked)} distances; "
              f"kappa=1 bitwise equal: {bitwise}; {elapsed:.0f} s")
    if worst is not None and bad:
        detail += (f"; e.g. {worst.distance_km:g} km: oblivious {worst.rate_oblivious:.3e} "
                   f"< aware {worst.rate_actual_aware:.3e} (mu_opt {worst.mu_opt:.3f})")
    acceptance("overestimation ordering", ok, detail)
    assert ok


def test_scaling(acceptance):
    distances = np.arange(100.0, 301.0, 10.0)
    det = DetectorModel(1e-8)
    rates = [optimize_params(det, ChannelModel(L)).best_rate for L in distances]
    slope = np.polyfit(distances, np.log10(rates), 1)[0]
    target = -0.2 / 20
    ok = abs(slope - target) <= 0.2 * abs(target)
    acceptance("scaling", ok, f"slope {slope:.5f} per km vs {target:.3f} +/- 20%")
    assert ok


def test_watchdog_asymmetry(acceptance):
    start = time.perf_counter()
    amplitudes = np.linspace(0.1, 1.0, 10)  # peak-to-peak, calibrated maximum 1.0
    pm_fail, pd_fail, cases = [], [], 0
    for kind in ("UpToDown", "DownToUp"):
        for amp in amplitudes:
            inj = synthesize_waveform(ModulationPattern(kind, amp / 2, 50e-12, 1e-9, BASE),
                                      1e-9, RATE)
            for label, wave in (("injected", inj), ("locked", apply_laser_response(inj, RESP))):
                for t_int in (25e-6, 50e-6, 100e-6):
                    cases += 1
                    # one noise seed fixed up front for every configuration
                    r = power_meter_readout(wave, PowerMeterModel(t_int), 100_000, seed=0)
                    if not abs(r.mean_deviation) < 3 * r.mean_deviation_stderr:
                        pm_fail.append(f"{kind}/{label}/{amp:.1f}/{t_int * 1e6:g}us")
                if amp > 0.1 + 1e-12 and not fast_pd_detect(wave, FastPDModel()).detected:
                    pd_fail.append(f"{kind}/{label}/{amp:.1f}")
    elapsed = time.perf_counter() - start
    ok = not pm_fail and not pd_fail and elapsed < 180
    acceptance("watchdog asymmetry", ok,
               f"power meter blind in {cases - len(pm_fail)}/{cases} cases, fast PD misses "
               f"{len(pd_fail)}; {elapsed:.1f} s" + (f"; {pm_fail + pd_fail}" if not ok else ""))
    assert ok


def test_snspd_calibration(acceptance):
    inj = synthesize_waveform(ModulationPattern("UpToDown", 0.5, 50e-12, 1e-9, BASE), 1e-9, RATE)
    tr = snspd_counts(apply_laser_response(inj, RESP), SNSPDModel(), seed=0,
                      repetitions=1_000_000)
    ok = abs(tr.relative_peak - 0.51) <= 0.03
    acceptance("51% calibration", ok,
               f"relative peak {tr.relative_peak:+.4f} (Poisson stderr {tr.relative_peak_stderr:.4f})")
    assert ok


def test_sideband_monotonicity(acceptance):
    powers, parseval = [], []
    for amp in np.concatenate([[0.0], np.linspace(0.1, 1.0, 10)]):
        inj = synthesize_waveform(ModulationPattern("UpToDown", amp / 2, 50e-12, 1e-9, BASE),
                                  1e-9, RATE)
        out = apply_laser_response(inj, RESP)
        spec = optical_spectrum(out, RESP)
        parseval.append(abs(spec.total_power - out.mean_power) / out.mean_power)
        powers.append((sideband_monitor(spec, 0.5e9), spec.total_power))
    zero_ok = powers[0][0] <= 1e-10 * powers[0][1]
    side = [p for p, _ in powers[1:]]
    mono = all(b >= a for a, b in zip(side, side[1:]))
    ok = zero_ok and mono and max(parseval) <= 1e-9
    acceptance("sideband monotonicity", ok,
               f"zero-modulation fraction {powers[0][0] / powers[0][1]:.1e}, non-decreasing "
               f"over 10 amplitudes: {mono}, worst Parseval error {max(parseval):.1e}")
    assert ok


def test_budget_arithmetic(acceptance):
    need = required_isolation_db(100.0, 1550.0, 1e9, 1e-7)
    lidt = lidt_at(2200.0)
    ok_need = abs(need - 189.9) <= 0.1
    ok_lidt = abs(lidt - 119.1) <= 0.1
    acceptance("budget arithmetic", ok_need and ok_lidt,
               f"required isolation {need:.3f} dB (target 189.9 +/- 0.1), "
               f"LIDT(2200 nm) {lidt:.3f} W (target 119.1 +/- 0.1)")
    assert ok_need and ok_lidt


def test_invariant_suite(acceptance):
    tests_dir = Path(__file__).resolve().parent
    env = {**os.environ, "HYPOTHESIS_PROFILE": "invariants"}
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", str(tests_dir), "-m", "invariant", "-q",
         "-p", "no:cacheprovider", "--no-header"],
        capture_output=True, text=True, env=env, cwd=tests_dir.parent)
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    failed = [ln.split(" - ")[0].replace("FAILED ", "") for ln in proc.stdout.splitlines()
              if ln.startswith("FAILED")]
    ok = proc.returncode == 0 and elapsed < 600
    acceptance("invariant suite", ok, f"{summary.strip('= ')} ({elapsed:.0f} s)"
               + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok
