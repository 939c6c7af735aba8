"""Monte Carlo detection oracle for the closed-form SNS yields.

Each round is simulated at the photon level: coherent states with random
phases are combined on a 50:50 beam splitter as two-component Jones vectors
(Bob's polarisation rotated by the polarisation misalignment), photon numbers
at each output are drawn from Poisson distributions, and dark counts are
OR-ed in independently. An event is a round in which exactly one of the two
detectors clicks. None of the closed-form yield expressions are used.

Rounds are split into fixed-size chunks, each with its own substream spawned
from ``SeedSequence(seed)``, so results depend only on ``(seed, rounds)`` and
not on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .keyrate import ChannelModel, DetectorModel, ProtocolParams, arm_transmittance

MIN_ROUNDS = 100_000
CHUNK = 1_000_000


@dataclass(frozen=True)
class OracleEstimate:
    corr: float
    err: float
    corr_stderr: float
    err_stderr: float
    rounds: int
    corr_events: int
    err_events: int


def _binomial_stderr(k: int, n: int) -> float:
    # floor at one event so an empty tally still carries a resolution limit
    p = max(k, 1) / n
    return math.sqrt(p * (1 - p) / n)


def _clicks(rng, plus_field, minus_field, pd):
    i_plus = np.sum(np.abs(plus_field) ** 2, axis=0)
    i_minus = np.sum(np.abs(minus_field) ** 2, axis=0)
    n = i_plus.shape[0]
    click_plus = rng.poisson(i_plus) > 0
    click_minus = rng.poisson(i_minus) > 0
    if pd > 0:
        click_plus |= rng.random(n) < pd
        click_minus |= rng.random(n) < pd
    return click_plus, click_minus


def _interfere(alpha, beta, pol_angle):
    """Output Jones vectors of a 50:50 beam splitter; Alice horizontal, Bob rotated."""
    cb, sb = math.cos(pol_angle), math.sin(pol_angle)
    r = 1 / math.sqrt(2)
    plus = np.stack([(alpha + beta * cb) * r, beta * sb * r])
    minus = np.stack([(alpha - beta * cb) * r, -beta * sb * r])
    return plus, minus


def _z_chunk(args):
    ss, n, eps, amp, pd, pol = args
    rng = np.random.default_rng(ss)
    a_sent = rng.random(n) < eps
    b_sent = rng.random(n) < eps
    phase_a = rng.random(n) * (2 * np.pi)
    phase_b = rng.random(n) * (2 * np.pi)
    alpha = amp * a_sent * np.exp(1j * phase_a)
    beta = amp * b_sent * np.exp(1j * phase_b)
    cp, cm = _clicks(rng, *_interfere(alpha, beta, pol), pd)
    event = cp ^ cm
    single_sender = a_sent ^ b_sent
    return int(np.count_nonzero(event & single_sender)), int(np.count_nonzero(event & ~single_sender))


def _x_chunk(args):
    ss, n, amp, pd, pol, dtheta = args
    rng = np.random.default_rng(ss)
    phase_a = rng.random(n) * (2 * np.pi)
    alpha = amp * np.exp(1j * phase_a)
    beta = amp * np.exp(1j * (phase_a + dtheta))
    cp, cm = _clicks(rng, *_interfere(alpha, beta, pol), pd)
    return int(np.count_nonzero(cp & ~cm)), int(np.count_nonzero(cm & ~cp))


def _run(worker, make_args, rounds: int, seed: int, n_jobs: int):
    n_chunks = -(-rounds // CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [CHUNK] * (n_chunks - 1) + [rounds - CHUNK * (n_chunks - 1)]
    jobs = [make_args(ss, n) for ss, n in zip(seqs, sizes)]
    if n_jobs == 1:
        results = [worker(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(worker, jobs))
    k_corr = sum(r[0] for r in results)
    k_err = sum(r[1] for r in results)
    return OracleEstimate(
        corr=k_corr / rounds, err=k_err / rounds,
        corr_stderr=_binomial_stderr(k_corr, rounds),
        err_stderr=_binomial_stderr(k_err, rounds),
        rounds=rounds, corr_events=k_corr, err_events=k_err,
    )


def _check_rounds(rounds: int, pd: float) -> int:
    rounds = int(rounds)
    if rounds < MIN_ROUNDS:
        raise ValueError(f"rounds must be at least {MIN_ROUNDS}, got {rounds}")
    if 0 < pd and rounds * pd < 10:
        warnings.warn(
            f"{rounds} rounds resolve dark counts of probability {pd:g} with fewer than "
            "10 expected events", RuntimeWarning, stacklevel=3)
    return rounds


def monte_carlo_z_oracle(p: ProtocolParams, det: DetectorModel, ch: ChannelModel,
                         rounds: int = 10_000_000, seed: int = 0, *,
                         intensity: float | None = None, n_jobs: int = 1) -> OracleEstimate:
    """Estimate the key-basis correct and erroneous yields by simulation.

    Correct events come from rounds where exactly one party sent a pulse,
    errors from rounds where both or neither did.
    """
    pd = det.dark_count_prob
    rounds = _check_rounds(rounds, pd)
    mu = p.signal_intensity if intensity is None else intensity
    amp = math.sqrt(mu * arm_transmittance(ch, det))
    pol = p.polarisation_misalignment
    return _run(_z_chunk, lambda ss, n: (ss, n, p.send_prob, amp, pd, pol), rounds, seed, n_jobs)


def monte_carlo_x_oracle(p: ProtocolParams, det: DetectorModel, ch: ChannelModel,
                         rounds: int = 10_000_000, seed: int = 0, *,
                         n_jobs: int = 1) -> OracleEstimate:
    """Estimate the decoy-window yields by simulation.

    Both parties send the decoy intensity with a shared random phase offset by
    the phase misalignment; a click on the constructive port alone is correct,
    on the destructive port alone an error.
    """
    pd = det.dark_count_prob
    rounds = _check_rounds(rounds, pd)
    amp = math.sqrt(p.decoy_intensity * arm_transmittance(ch, det))
    pol, dth = p.polarisation_misalignment, p.phase_misalignment
    return _run(_x_chunk, lambda ss, n: (ss, n, amp, pd, pol, dth), rounds, seed, n_jobs)
