import numpy as np
import pytest

from tmi.chirp import ChirpParams, interstage_matching_correction, prechirp_profiles
from tmi.errors import CollisionIncomplete
from tmi.solver import fwm_stage
from tmi.timegrid import Envelope, default_grid, make_gaussian

GRID = default_grid(1024, 2.0)
TAU = 0.1


def _stage(gamma=0.8, sign=1):
    return fwm_stage(GRID, TAU, TAU, gamma, dispersion_sign=sign)


def test_chirp_params_defaults():
    st = _stage()
    p1 = ChirpParams.for_stage(st, 2.0, 0.0, 1)
    assert p1.kron_coeff == 0.0
    assert p1.gamma_bar == pytest.approx(st.gamma)
    p2 = ChirpParams.for_stage(_stage(sign=-1), 2.0, 0.0, 2)
    assert p2.kron_coeff == 1.0
    assert p2.gamma_bar == pytest.approx(-st.gamma)
    with pytest.raises(ValueError):
        ChirpParams(1.0, 0.0, 3, 0.5, 0.5)


def test_integral_term_vanishes_for_identical_shapes():
    # identical co-centered envelope shapes zero the running-integral term,
    # leaving exactly the local, frequency-shift, and quartic-style terms
    st = _stage(gamma=0.8)
    params = ChirpParams.for_stage(st, 1.3, -0.4, 1)
    prof = prechirp_profiles(params, st.pump_p, st.pump_q)
    t = GRID.times
    gb = st.gamma
    ip = np.abs(st.pump_p.samples) ** 2
    iq = np.abs(st.pump_q.samples) ** 2
    peak = (np.pi * TAU**2) ** (-0.5)
    u_p, u_q = t - 0.25, t + 0.25
    expect_p = -1.5 * gb * ip * u_p + 1.5 * gb * peak * u_p + 1.3 * gb * ip
    expect_q = 1.5 * gb * iq * u_q - 1.5 * gb * peak * u_q + (-0.4) * gb * iq
    assert np.max(np.abs(prof.alpha_p - expect_p)) < 1e-9
    assert np.max(np.abs(prof.alpha_q - expect_q)) < 1e-9


def test_peak_value_matches_quartic_term():
    # at the pump center all odd terms vanish; alpha_p(0) = eps_p gamma l / (sqrt(pi) tau)
    st = _stage(gamma=0.7)
    params = ChirpParams.for_stage(st, 1.0, 0.0, 1)
    prof = prechirp_profiles(params, st.pump_p, st.pump_q)
    idx = np.argmin(np.abs(GRID.times - 0.25))
    expected = 1.0 * st.gamma * st.length * (np.pi * TAU**2) ** (-0.5)
    assert prof.alpha_p[idx] == pytest.approx(expected, rel=1e-6)
    # dropping the quartic coefficient zeroes the center value
    params0 = ChirpParams.for_stage(st, 0.0, 0.0, 1)
    prof0 = prechirp_profiles(params0, st.pump_p, st.pump_q)
    assert abs(prof0.alpha_p[idx]) < 1e-10


def test_stage_two_coefficients():
    # stage 2 subtracts the Kronecker term from both quartic coefficients
    st2 = _stage(sign=-1)
    params = ChirpParams.for_stage(st2, 2.0, 0.0, 2)
    prof = prechirp_profiles(params, st2.pump_p, st2.pump_q)
    idx_p = np.argmin(np.abs(GRID.times + 0.25))
    idx_q = np.argmin(np.abs(GRID.times - 0.25))
    peak = (np.pi * TAU**2) ** (-0.5)
    assert prof.alpha_p[idx_p] == pytest.approx((2.0 - 1.0) * st2.gamma * peak, rel=1e-6)
    assert prof.alpha_q[idx_q] == pytest.approx((0.0 - 1.0) * st2.gamma * peak, rel=1e-6)


def test_frequency_shift_antisymmetry():
    st1, st2 = _stage(sign=1), _stage(sign=-1)
    prof1 = prechirp_profiles(ChirpParams.for_stage(st1, 1.0, 0.5, 1), st1.pump_p, st1.pump_q)
    prof2 = prechirp_profiles(ChirpParams.for_stage(st2, 1.0, 0.5, 2), st2.pump_p, st2.pump_q)
    assert prof1.freq_shift_p == pytest.approx(-prof2.freq_shift_p, rel=1e-12)
    assert prof1.freq_shift_q == pytest.approx(-prof2.freq_shift_q, rel=1e-12)
    assert prof1.freq_shift_p != 0.0


def test_profiles_real_and_energy_preserving():
    st = _stage()
    prof = prechirp_profiles(ChirpParams.for_stage(st, 2.0, 0.0, 1), st.pump_p, st.pump_q)
    assert np.isrealobj(prof.alpha_p) and np.isrealobj(prof.alpha_q)
    chirped = Envelope(GRID, st.pump_p.samples * np.exp(1j * prof.alpha_p))
    assert chirped.energy() == pytest.approx(st.pump_p.energy(), rel=1e-12)


def test_zero_coupling_limit():
    st = _stage(gamma=0.5)
    params = ChirpParams(epsilon_p=0.0, epsilon_q=0.0, stage_index=1,
                         gamma_bar=0.0, gamma_l=0.0, kron_coeff=0.0)
    prof = prechirp_profiles(params, st.pump_p, st.pump_q)
    assert np.max(np.abs(prof.alpha_p)) == 0.0
    assert np.max(np.abs(prof.alpha_q)) == 0.0


def test_incomplete_collision_rejected():
    overlapping = fwm_stage(GRID, TAU, TAU, 0.5, pump_separation=0.15,)
    with pytest.raises(CollisionIncomplete):
        prechirp_profiles(
            ChirpParams.for_stage(overlapping, 1.0, 0.0, 1),
            overlapping.pump_p, overlapping.pump_q,
        )


def test_matching_correction_shape():
    st2 = _stage(sign=-1)
    d_p, d_q = interstage_matching_correction(st2)
    # monotone step profiles with opposite signs for the two pumps
    assert d_p[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(d_p) <= 1e-15)  # gamma_bar < 0 for stage 2
    assert np.all(np.diff(d_q) >= -1e-15)
    assert d_p[-1] == pytest.approx(-2.0 * 1.125 * st2.gamma, rel=1e-3)
