import numpy as np
import pytest

from tmi.adjoint import StageChain, dominant_schmidt
from tmi.cascade import (
    CascadeSpec,
    _composite_block,
    _interface_shifts,
    _stage_op,
    calibrate_gamma,
    direct_composite_block,
    interface_overlaps,
    make_twm_cascade,
    multistage_target_ce,
    run_cascade,
    stage_count_sweep,
    theta_scan,
)
from tmi.errors import ConfigMismatch, NotBracketed
from tmi.solver import twm_stage
from tmi.timegrid import default_grid, inner_product

GRID = default_grid(2048, 4.0)
ZETA = 25.0


@pytest.fixture(scope="module")
def gamma50():
    return calibrate_gamma(twm_stage(GRID, ZETA, 1.0), 0.5, gamma_hint=0.3)


@pytest.fixture(scope="module")
def rc_pair(gamma50):
    spec, _ = make_twm_cascade(GRID, zeta=ZETA, gamma=gamma50, n_stages=2, configuration="rc")
    return spec


def test_multistage_target_formula():
    assert multistage_target_ce(2) == pytest.approx(0.5)
    assert multistage_target_ce(4) == pytest.approx(0.146447, abs=1e-6)


def test_calibration_hits_target(gamma50):
    st = twm_stage(GRID, ZETA, gamma50)
    ds = dominant_schmidt(
        StageChain((st,)), n_modes=2, seed_width=1.0 / ZETA, seed_center=0.25, tol=1e-10
    )
    assert ds.rho_sq[0] == pytest.approx(0.5, abs=1e-4)
    # calibrated half stage discriminates orthogonal modes strongly
    assert ds.rho_sq[1] < 0.05 * ds.rho_sq[0]


def test_calibration_not_bracketed():
    # unreachable tolerance surfaces as NotBracketed rather than a silent
    # wrong answer
    with pytest.raises(NotBracketed):
        calibrate_gamma(
            twm_stage(GRID, ZETA, 1.0), 0.371,
            ce_tol=1e-15, gamma_hint=0.3, max_iter=3,
        )


def test_cascade_spec_validation(gamma50):
    plus = twm_stage(GRID, ZETA, gamma50, dispersion_sign=1)
    minus = twm_stage(GRID, ZETA, gamma50, dispersion_sign=-1)
    with pytest.raises(ConfigMismatch):
        CascadeSpec(stages=(plus, plus), configuration="rc")
    with pytest.raises(ConfigMismatch):
        CascadeSpec(stages=(plus, minus), configuration="dc")
    with pytest.raises(ConfigMismatch):
        CascadeSpec(stages=(plus, plus), configuration="dc", dc_delay_samples=101)


def test_composition_equivalence(rc_pair):
    ops = [_stage_op(st, 20, None) for st in rc_pair.stages]
    block_m = _composite_block(rc_pair, ops, rc_pair.theta)
    block_d = direct_composite_block(rc_pair, basis_size=20, completeness_tol=None)
    rel = np.linalg.norm(block_m - block_d) / np.linalg.norm(block_d)
    assert rel < 1e-3


def test_composition_equivalence_dc(gamma50):
    spec, _ = make_twm_cascade(GRID, zeta=ZETA, gamma=gamma50, n_stages=2, configuration="dc")
    ops = [_stage_op(st, 20, None) for st in spec.stages]
    block_m = _composite_block(spec, ops, 0.0)
    block_d = direct_composite_block(spec, basis_size=20, completeness_tol=None)
    assert np.linalg.norm(block_m - block_d) / np.linalg.norm(block_d) < 1e-3


def test_phase_interferometry(rc_pair):
    thetas = np.linspace(0.0, 2.0 * np.pi, 17)
    rho1_sq, theta0, resid = theta_scan(rc_pair, thetas, basis_size=20, completeness_tol=None)
    assert resid < 0.01
    # suppression at half a period from the fitted offset
    rho_pi, _, _ = theta_scan(
        rc_pair.__class__(stages=rc_pair.stages, configuration="rc", theta=0.0),
        np.array([theta0 + np.pi]), basis_size=20, completeness_tol=None,
    )
    assert rho_pi[0] <= 0.01


def test_run_cascade_report(rc_pair):
    rep = run_cascade(rc_pair, basis_size=20, completeness_tol=None, n_trace_per_stage=17)
    sd = rep.schmidt
    assert 0.0 <= sd.selectivity <= 1.0
    # energy trace endpoint equals the composite first CE
    z_end, frac_end = rep.energy_trace[-1]
    assert z_end == pytest.approx(2.0)
    assert frac_end == pytest.approx(sd.rho_sq[0], abs=5e-3)
    # RC interface overlaps are essentially exact
    assert abs(rep.overlaps[0].mu[0, 0]) == pytest.approx(1.0, abs=2e-3)
    assert abs(rep.overlaps[0].eta[0, 0]) == pytest.approx(1.0, abs=2e-3)
    assert abs(rep.theta0) < 0.05
    assert np.all(np.abs(rep.overlaps[0].mu) <= 1.0 + 1e-9)


def test_unconverted_mode_transparency(rc_pair):
    # modes beyond the target pass the RC pair without shape distortion
    # (the tight 0.98 transmission bound belongs to the zeta = 200
    # acceptance system; this coarse-zeta check guards the structure)
    rep = run_cascade(rc_pair, basis_size=20, completeness_tol=None, include_trace=False)
    sd = rep.schmidt
    for n in range(1, 4):
        assert sd.tau_sq[n] >= 0.9
        overlap = abs(inner_product(sd.modes_s_out[n], sd.modes_s_in[n]))
        assert overlap >= 0.99


def test_odd_even_stage_count_rule(gamma50):
    # odd N: the converted channel exits with its own input mode shape
    # (recentered by the net walk-off); even N: the unconverted channel is
    # distortion-free in place
    from tmi.timegrid import Envelope, shift_array

    gam3 = calibrate_gamma(
        twm_stage(GRID, ZETA, 1.0), multistage_target_ce(3), gamma_hint=gamma50 * 0.6
    )
    spec3, _ = make_twm_cascade(GRID, zeta=ZETA, gamma=gam3, n_stages=3, configuration="rc")
    rep3 = run_cascade(spec3, basis_size=20, completeness_tol=None, include_trace=False)
    sd3 = rep3.schmidt
    half_window = GRID.n_samples // 8  # T_w / 2 on this grid
    recentered = Envelope(GRID, shift_array(sd3.modes_r_in[0].samples, half_window))
    assert abs(inner_product(sd3.modes_r_out[0], recentered)) > 0.99
    # even N companion: see test_unconverted_mode_transparency


def test_interface_overlaps_identity(rc_pair):
    rep = run_cascade(rc_pair, basis_size=20, completeness_tol=None, include_trace=False)
    sd = rep.stage_schmidt[0]
    ov = interface_overlaps(sd, sd, 3)
    # overlapping a stage with itself pairs output against input modes;
    # the diagonal magnitudes are bounded by one
    assert ov.mu.shape == (3, 3)
    assert np.all(np.abs(ov.mu) <= 1.0 + 1e-9)
    same = interface_overlaps(sd, sd, 2, shift_r=0, shift_s=0)
    assert np.all(np.abs(same.eta) <= 1.0 + 1e-9)


def test_stage_count_sweep_small(gamma50):
    spec, _ = make_twm_cascade(GRID, zeta=ZETA, gamma=gamma50, n_stages=2, configuration="rc")
    points = stage_count_sweep(spec, [2, 3], basis_size=16, polish=False,
                               completeness_tol=None, n_trace_per_stage=9)
    assert [p.n_stages for p in points] == [2, 3]
    for p in points:
        assert abs(p.achieved_ce - p.target_ce) < 1e-3
        assert 0.8 < p.selectivity_rc <= 1.0
        assert p.trace[-1][0] == pytest.approx(p.n_stages)
