import numpy as np
import pytest

import tmi
from tmi.adjoint import StageChain
from tmi.errors import CollisionIncomplete
from tmi.solver import (
    StageParams,
    fwm_stage,
    propagate,
    propagate_arrays,
    snapshot_propagate,
    twm_stage,
)
from tmi.timegrid import default_grid, make_gaussian, make_hermite_gauss, shift

GRID = default_grid(512, 2.0)
ZETA = 20.0  # tau_p = 0.05, comfortably resolved at 512 samples


def _signals(grid=GRID):
    r0 = make_gaussian(grid, -0.25, 0.1)
    s0 = make_gaussian(grid, 0.25, 1.0 / ZETA)
    return r0, s0


def test_free_advection_is_exact_shift():
    st = twm_stage(GRID, ZETA, gamma=0.0)
    r0, s0 = _signals()
    out_r, out_s = propagate(st, r0, s0)
    k = GRID.n_samples // 4  # half a walk-off window
    assert np.array_equal(out_r.samples, shift(r0, k).samples)
    assert np.array_equal(out_s.samples, shift(s0, -k).samples)


def test_signal_energy_conservation():
    st = twm_stage(GRID, ZETA, gamma=2.0)
    r0, s0 = _signals()
    out_r, out_s = propagate(st, r0, s0)
    e0 = r0.energy() + s0.energy()
    e1 = out_r.energy() + out_s.energy()
    assert abs(e1 - e0) / e0 < 1e-6


def test_pump_energy_conservation_fwm():
    st = fwm_stage(GRID, 0.1, 0.1, gamma=0.6)
    r0, s0 = _signals()
    res = propagate_arrays(st, r0.samples, s0.samples)
    for pump, initial in ((res.pump_p, st.pump_p), (res.pump_q, st.pump_q)):
        e0 = initial.energy()
        e1 = float(np.sum(np.abs(pump) ** 2)) * GRID.dt
        assert abs(e1 - e0) / e0 < 1e-10


def test_linearity_in_signals():
    st = twm_stage(GRID, ZETA, gamma=1.5)
    r0, s0 = _signals()
    r1 = make_gaussian(GRID, -0.1, 0.08)
    s1 = make_hermite_gauss(GRID, 1, 1.0 / ZETA, 0.25)
    a, b = 0.3 - 0.7j, -0.55 + 0.2j
    out_sum = propagate_arrays(
        st, a * r0.samples + b * r1.samples, a * s0.samples + b * s1.samples
    )
    out_0 = propagate_arrays(st, r0.samples, s0.samples)
    out_1 = propagate_arrays(st, r1.samples, s1.samples)
    assert np.max(np.abs(out_sum.r - a * out_0.r - b * out_1.r)) < 1e-8
    assert np.max(np.abs(out_sum.s - a * out_0.s - b * out_1.s)) < 1e-8


@pytest.mark.parametrize("make", [
    lambda: twm_stage(GRID, ZETA, gamma=2.0),
    lambda: fwm_stage(GRID, 0.1, 0.1, gamma=0.6),
])
def test_reversibility(make):
    # the conjugated reversed stage undoes the propagation
    st = make()
    r0, s0 = _signals()
    chain = StageChain((st,))
    rr, ss = chain.apply(r0.samples, s0.samples)
    rb, sb = chain.apply_inverse(rr, ss)
    assert np.max(np.abs(rb - r0.samples)) < 1e-4
    assert np.max(np.abs(sb - s0.samples)) < 1e-4


def test_step_doubling_convergence():
    # halving the coupling substep changes outputs below 1e-6 of peak
    st = twm_stage(GRID, ZETA, gamma=2.0)
    r0, s0 = _signals()
    out1 = propagate_arrays(st, r0.samples, s0.samples, n_substeps=1)
    out2 = propagate_arrays(st, r0.samples, s0.samples, n_substeps=2)
    peak = max(np.max(np.abs(out1.r)), np.max(np.abs(out1.s)))
    assert np.max(np.abs(out1.r - out2.r)) < 1e-6 * peak
    assert np.max(np.abs(out1.s - out2.s)) < 1e-6 * peak


def test_fwm_pump_phase_matches_characteristic_integral():
    # pump magnitudes advect rigidly, so the accumulated self/cross phase
    # is a 1-D integral along each characteristic
    grid = default_grid(2048, 2.0)
    gamma = 0.5
    st = fwm_stage(grid, 0.1, 0.1, gamma=gamma)
    zeros = np.zeros((grid.n_samples, 0))
    res = propagate_arrays(st, zeros, zeros)
    t = grid.times
    # pump p launches at +0.25 moving toward -t; its final position is -0.25
    p_in = st.pump_p.samples
    p_out = res.pump_p
    iq0 = np.abs(st.pump_q.samples) ** 2
    zs = np.linspace(0.0, 1.0, 4001)
    core = np.abs(t + 0.25) < 0.15  # where the exited pump has support
    for idx in np.flatnonzero(core)[:: 40]:
        t_exit = t[idx]
        t_launch = t_exit + 0.5
        # SPM: (g/2)|Ap(u)|^2 l; XPM: g * integral of |Aq| seen along the path
        ip = np.interp(t_launch, t, np.abs(p_in) ** 2)
        xpm = np.trapezoid(np.interp(t_launch - zs, t, iq0), zs)
        phase_pred = 0.5 * gamma * ip + gamma * xpm
        launch_amp = np.interp(t_launch, t, p_in.real)
        measured = np.angle(p_out[idx] / launch_amp)
        assert abs(measured - phase_pred) < 1e-4


def test_snapshot_trace_consistency():
    st = twm_stage(GRID, ZETA, gamma=1.5)
    r0, s0 = _signals()
    trace, out_r, out_s = snapshot_propagate(st, r0, s0, n_snapshots=9)
    assert len(trace) == 9
    assert trace[0][0] == 0.0 and trace[-1][0] == pytest.approx(st.length)
    assert trace[-1][1] == pytest.approx(out_r.energy(), abs=1e-12)
    assert trace[-1][2] == pytest.approx(out_s.energy(), abs=1e-12)
    # gamma = 0: constant trace
    st0 = twm_stage(GRID, ZETA, gamma=0.0)
    trace0, *_ = snapshot_propagate(st0, r0, s0, n_snapshots=5)
    energies = [e_r for _, e_r, _ in trace0]
    assert max(energies) - min(energies) < 1e-14


def test_born_oracle_orthogonal_mode_conversion():
    # first-order comparison: r(t) = i g [F(t + l/2) - F(t - l/2)] with F the
    # running integral of pump * signal (quadrature oracle, deep perturbative)
    grid = default_grid(2048, 2.0)
    gamma = 0.02
    tau = 0.01
    st = twm_stage(grid, 1.0 / tau, gamma)
    t, dt = grid.times, grid.dt
    p0 = make_gaussian(grid, 0.25, tau).samples.real
    for order in (0, 1):
        s0 = make_hermite_gauss(grid, order, tau, 0.25).samples.real
        F = np.cumsum(p0 * s0) * dt
        born = gamma * (
            np.interp(t + 0.5, t, F, left=0, right=F[-1])
            - np.interp(t - 0.5, t, F, left=0, right=F[-1])
        )
        e_born = np.sum(born**2) * dt
        res = propagate_arrays(st, np.zeros_like(s0) + 0j, s0 + 0j)
        e_solver = float(np.sum(np.abs(res.r) ** 2)) * dt
        assert e_solver == pytest.approx(e_born, rel=0.01)


def test_collision_incomplete_detection():
    grid = default_grid(1024, 2.0)
    with pytest.raises(CollisionIncomplete):
        st = fwm_stage(grid, 0.1, 0.1, gamma=0.5, pump_separation=0.2)
        propagate_arrays(st, np.zeros(1024, complex), np.zeros(1024, complex))


def test_stage_params_validation():
    pump = make_gaussian(GRID, 0.25, 0.05)
    with pytest.raises(ValueError):
        StageParams(beta_p=-0.5, beta_q=0.5, beta_r=0.5, beta_s=-0.5,
                    gamma=-1.0, delta_F=0, pump_p=pump)
    with pytest.raises(ValueError):
        StageParams(beta_p=-0.5, beta_q=0.5, beta_r=0.3, beta_s=-0.5,
                    gamma=1.0, delta_F=0, pump_p=pump)
    with pytest.raises(ValueError):  # pump not velocity-matched
        StageParams(beta_p=-0.3, beta_q=0.5, beta_r=0.5, beta_s=-0.5,
                    gamma=1.0, delta_F=0, pump_p=pump, gvm_override=False)
    st = StageParams(beta_p=-0.5, beta_q=0.5, beta_r=0.5, beta_s=-0.5,
                     gamma=1.0, delta_F=0, pump_p=pump)
    assert st.pump_partner == "s"
