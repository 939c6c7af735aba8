import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oiltfqkd import (
    ChannelModel,
    DetectorModel,
    NonDistillableError,
    ProtocolParams,
    compute_yields,
    monte_carlo_z_oracle,
    optimize_params,
    phase_error_bound,
    secret_key_rate,
    single_photon_yield,
    vacuum_yield,
    x_basis_yields,
    z_basis_yields,
)

KAPPA = 1.51
# 100 km at 0.2 dB/km gives eta = 0.01, t = 0.1
T01 = ChannelModel(distance_km=100.0)

probs = st.floats(0.0, 1.0)
pds = st.sampled_from([0.0, 1e-8, 1e-6]) | st.floats(0.0, 0.5)
dists = st.floats(0.0, 500.0)
angles = st.floats(-math.pi, math.pi)


@st.composite
def tuples(draw):
    p = ProtocolParams(send_prob=draw(probs), signal_intensity=draw(st.floats(0.0, 2.0)),
                       decoy_intensity=draw(st.floats(1e-8, 1e-2)),
                       phase_misalignment=draw(angles), polarisation_misalignment=draw(angles))
    det = DetectorModel(draw(pds), draw(st.floats(0.05, 1.0)))
    return p, det, ChannelModel(draw(dists))


# -- channel and detector types --------------------------------------------------

@given(st.floats(0.0, 1000.0), st.floats(0.0, 1.0))
def test_channel_transmittance(L, alpha):
    ch = ChannelModel(L, alpha)
    assert 0.0 <= ch.total_transmittance <= 1.0
    assert ch.half_link_transmittance == math.sqrt(ch.total_transmittance)


@given(st.floats(0.0, 300.0), st.floats(0.1, 100.0), st.floats(0.01, 1.0))
def test_channel_strictly_lossy(L, dL, alpha):
    assert ChannelModel(L + dL, alpha).total_transmittance < ChannelModel(L, alpha).total_transmittance


@pytest.mark.parametrize("kwargs", [{"dark_count_prob": 1.0}, {"dark_count_prob": -1e-9},
                                    {"efficiency": 0.0}, {"efficiency": 1.2}])
def test_detector_rejects(kwargs):
    with pytest.raises(ValueError):
        DetectorModel(**kwargs)


def test_detector_efficiency_applied_once():
    ch = ChannelModel(0.0)
    assert single_photon_yield(DetectorModel(0.0, 0.5), ch) == 0.5
    assert single_photon_yield(DetectorModel(0.0, 0.5), ChannelModel(100.0)) == pytest.approx(0.05)


def test_protocol_violations_name_fields():
    assert ProtocolParams().violations() == []
    msgs = ProtocolParams(send_prob=0.0, decoy_intensity=0.5, signal_intensity=0.4,
                          ec_efficiency=0.9).violations()
    joined = " ".join(msgs)
    assert "send_prob" in joined and "decoy_intensity" in joined and "ec_efficiency" in joined
    with pytest.raises(ValueError, match="send_prob"):
        ProtocolParams(send_prob=1.5)


# -- yields ---------------------------------------------------------------------------

def test_vacuum_yield_examples():
    assert vacuum_yield(DetectorModel(0.0)) == 0.0
    assert vacuum_yield(DetectorModel(0.5)) == 0.5
    assert vacuum_yield(DetectorModel(1e-8)) == pytest.approx(1.99999998e-8, rel=1e-15)


def test_vacuum_yield_dark_count_sampling():
    rng = np.random.default_rng(7)
    pd = 1e-3
    n = 2_000_000
    single = np.count_nonzero((rng.random(n) < pd) ^ (rng.random(n) < pd)) / n
    assert abs(single - vacuum_yield(DetectorModel(pd))) < 3 * math.sqrt(2 * pd / n)


def test_single_photon_yield_examples():
    assert single_photon_yield(DetectorModel(0.0), T01) == pytest.approx(0.1, rel=1e-15)
    # t underflows to 1e-100: s1 -> 2 p_d (1 - p_d)
    assert single_photon_yield(DetectorModel(1e-8), ChannelModel(10_000.0)) == pytest.approx(
        2e-8 * (1 - 1e-8), rel=1e-12)
    assert single_photon_yield(DetectorModel(0.0), ChannelModel(0.0)) == 1.0


def test_z_yields_trivial():
    det0 = DetectorModel(0.0)
    corr, err, sz, ez = z_basis_yields(ProtocolParams(send_prob=0.0), det0, T01)
    assert (corr, err, sz) == (0.0, 0.0, 0.0)
    assert math.isnan(ez)
    corr, *_ = z_basis_yields(ProtocolParams(signal_intensity=0.0), det0, T01)
    assert corr == 0.0


def test_z_yields_frozen():
    # 40-digit direct evaluation of the closed forms
    p = ProtocolParams(send_prob=0.3, signal_intensity=0.4)
    corr, err, sz, ez = z_basis_yields(p, DetectorModel(1e-8), T01)
    assert corr == pytest.approx(0.016303764597316599, rel=1e-12)
    assert err == pytest.approx(0.0068503518485400306, rel=1e-12)
    assert ez == pytest.approx(err / sz)


def test_z_yields_match_oracle():
    p = ProtocolParams(send_prob=0.3, signal_intensity=0.4)
    det = DetectorModel(1e-8)
    est = monte_carlo_z_oracle(p, det, T01, rounds=10_000_000, seed=11)
    corr, err, _, _ = z_basis_yields(p, det, T01)
    assert abs(est.corr - corr) <= 3 * est.corr_stderr
    assert abs(est.err - err) <= 3 * est.err_stderr


def test_z_intensity_override():
    p = ProtocolParams(signal_intensity=0.3, enhancement_factor=KAPPA)
    det = DetectorModel()
    assert z_basis_yields(p, det, T01, intensity=p.attacked_intensity) == z_basis_yields(
        p.with_(signal_intensity=0.3 * KAPPA), det, T01)


def test_x_yields_trivial():
    pd = 1e-3
    corr, err, sx, ex = x_basis_yields(ProtocolParams(decoy_intensity=0.0), DetectorModel(pd), T01)
    assert corr == pytest.approx(pd * (1 - pd), rel=1e-15)
    assert err == pytest.approx(pd * (1 - pd), rel=1e-15)
    _, err, _, ex = x_basis_yields(ProtocolParams(), DetectorModel(0.0), T01)
    assert err == 0.0 and ex == 0.0
    _, _, sx, ex = x_basis_yields(ProtocolParams(decoy_intensity=0.0), DetectorModel(0.0), T01)
    assert sx == 0.0 and math.isnan(ex)


def test_x_yields_frozen():
    corr, err, _, _ = x_basis_yields(ProtocolParams(decoy_intensity=1e-6), DetectorModel(1e-8), T01)
    assert corr == pytest.approx(2.0999997590000175e-7, rel=1e-12)
    assert err == pytest.approx(9.99999790000022e-9, rel=1e-12)


# -- phase error bound ---------------------------------------------------------------

def test_phase_error_zero_without_noise():
    assert phase_error_bound(None, ProtocolParams(), DetectorModel(0.0), T01) == 0.0


@pytest.mark.parametrize("nu,expected", [(1e-4, 9.0008084284566700e-8),
                                         (1e-5, 9.0000793804717137e-8),
                                         (1e-6, 9.0000064800036936e-8)])
def test_phase_error_frozen(nu, expected):
    val = phase_error_bound(None, ProtocolParams(decoy_intensity=nu), DetectorModel(1e-8), T01)
    assert val == pytest.approx(expected, rel=1e-9)


def test_phase_error_tightens_as_decoy_shrinks():
    vals = [phase_error_bound(None, ProtocolParams(decoy_intensity=nu), DetectorModel(1e-8), T01)
            for nu in (1e-4, 1e-5, 1e-6)]
    assert 0 < vals[-1] < 0.5
    assert vals[0] > vals[1] > vals[2]


def test_phase_error_clamped_high():
    p = ProtocolParams(phase_misalignment=math.pi)
    raw = phase_error_bound(None, p, DetectorModel(0.0), T01, raw=True)
    assert raw > 1.0
    assert phase_error_bound(None, p, DetectorModel(0.0), T01) == 1.0
    ys = compute_yields(p, DetectorModel(0.0), T01)
    assert ys.e_ph_bound == 1.0 and ys.e_ph_clamped


def test_phase_error_non_distillable():
    # t underflows to exactly zero, no dark counts: s1 = 0
    ch = ChannelModel(100_000.0)
    with pytest.raises(NonDistillableError):
        phase_error_bound(None, ProtocolParams(), DetectorModel(0.0), ch)
    with pytest.raises(NonDistillableError):
        secret_key_rate(ProtocolParams(), DetectorModel(0.0), ch)


# -- key rate -------------------------------------------------------------------------

def test_rate_zero_when_nothing_sent():
    assert secret_key_rate(ProtocolParams(send_prob=0.0), DetectorModel(0.0), T01) == 0.0


def test_rate_frozen_honest():
    p = ProtocolParams(send_prob=0.05, signal_intensity=0.5)
    r = secret_key_rate(p, DetectorModel(1e-8), T01)
    assert r == pytest.approx(0.0013104695659473377, rel=1e-9)
    assert secret_key_rate(p, DetectorModel(1e-8), T01, 0.5, 0.5) == r


def test_rate_may_be_negative():
    p = ProtocolParams(send_prob=0.5, signal_intensity=1.0, polarisation_misalignment=1.2)
    assert secret_key_rate(p, DetectorModel(1e-3), ChannelModel(300.0)) < 0


def test_rate_rejects_negative_intensity():
    with pytest.raises(ValueError):
        secret_key_rate(ProtocolParams(), DetectorModel(), T01, -0.1, 0.1)


# -- invariants -----------------------------------------------------------------------

@given(tuples())
def test_yield_identities(t):
    p, det, ch = t
    ys = compute_yields(p, det, ch)
    pd = det.dark_count_prob
    # exactly one, neither, both detectors dark-click: probabilities sum to one
    assert ys.s0 + (1 - pd) ** 2 + pd**2 == pytest.approx(1.0, abs=1e-15)
    assert ys.sz == ys.sz_corr + ys.sz_err
    assert ys.sx == ys.sx_corr + ys.sx_err
    if ys.sz > 0:
        assert ys.ez * ys.sz == pytest.approx(ys.sz_err, rel=1e-12)
        assert 0.0 <= ys.ez <= 1.0
    else:
        assert math.isnan(ys.ez)
    if ys.sx > 0:
        assert 0.0 <= ys.ex <= 1.0
    for v in (ys.s0, ys.s1, ys.sz_corr, ys.sz_err, ys.sz, ys.sx_corr, ys.sx_err, ys.sx):
        assert 0.0 <= v <= 1.0
    assert 0.0 <= ys.e_ph_bound <= 1.0
    assert ys.e_ph_bound == min(max(ys.e_ph_raw, 0.0), 1.0)


# sz_corr ~ exp(-x/2) - exp(-x) with x = mu t rises with x only while x < 2 ln 2,
# so monotonicity in L holds for mu <= 2 ln 2 (t <= 1); this covers the optimizer box
@given(probs, st.floats(0.0, 2 * math.log(2)), st.floats(0.0, 400.0), st.floats(0.0, 100.0), angles)
def test_sz_corr_non_increasing_in_distance(eps, mu, L, dL, dphi):
    p = ProtocolParams(send_prob=eps, signal_intensity=mu, polarisation_misalignment=dphi)
    det = DetectorModel(0.0)
    near = z_basis_yields(p, det, ChannelModel(L))[0]
    far = z_basis_yields(p, det, ChannelModel(L + dL))[0]
    assert far <= near * (1 + 1e-12)


def test_sz_corr_turns_over_above_two_ln_two():
    p = ProtocolParams(send_prob=0.5, signal_intensity=2.0)
    det = DetectorModel(0.0)
    assert z_basis_yields(p, det, ChannelModel(1.0))[0] > z_basis_yields(p, det, ChannelModel(0.0))[0]


@given(st.floats(1e-9, 1e-1), dists, st.floats(0.05, 1.0))
def test_phase_error_exactly_zero_when_noiseless(nu, L, eff):
    p = ProtocolParams(decoy_intensity=nu)
    assert phase_error_bound(None, p, DetectorModel(0.0, eff), ChannelModel(L)) == 0.0


@given(st.floats(0.0, 500.0))
def test_overestimation_ordering(L):
    det, ch = DetectorModel(1e-8), ChannelModel(L)
    opt = optimize_params(det, ch)
    honest = ProtocolParams(send_prob=opt.best_eps, signal_intensity=opt.best_mu)
    attacked = KAPPA * opt.best_mu
    oblivious = secret_key_rate(honest, det, ch, opt.best_mu, attacked)
    aware = secret_key_rate(honest, det, ch, attacked, attacked)
    assume(oblivious > 0 and aware > 0)
    assert oblivious >= aware
