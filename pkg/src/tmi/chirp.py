"""Analytic pump pre-chirp phase profiles for four-wave-mixing stages.

Self- and cross-phase modulation by the pumps imprints structured phases on
the Schmidt modes of an FWM stage.  Launching the pumps with the phase
profiles computed here compensates that modulation well enough to
temporally mode-match two reversed-collision stages.  Each profile contains
a term linear in time, equivalent to a small carrier-frequency shift, whose
sign flips between the two stages of an RC pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollisionIncomplete
from .solver import COLLISION_TOL, StageParams, _pump_overlap
from .timegrid import Envelope

#: Default free-parameter pair used for flat r-output / s-input mode phases.
FLAT_PHASE_EPSILONS = (2.0, 0.0)


@dataclass(frozen=True)
class ChirpParams:
    """Inputs of the pre-chirp formula for one stage.

    ``gamma_bar`` is the coupling divided by the signed slowness difference
    of the signal channels, so it flips sign between the stages of an RC
    pair.  ``kron_coeff`` is the weight of the extra quartic-style term that
    appears from the second stage on; it defaults to 1 for stage 2 and 0 for
    stage 1 and is exposed as an explicit knob because its generalization to
    longer cascades is configuration-dependent.
    """

    epsilon_p: float
    epsilon_q: float
    stage_index: int
    gamma_bar: float
    gamma_l: float
    kron_coeff: float | None = None

    def __post_init__(self):
        if self.stage_index not in (1, 2):
            raise ValueError("stage_index must be 1 or 2")
        if self.kron_coeff is None:
            object.__setattr__(self, "kron_coeff", 1.0 if self.stage_index == 2 else 0.0)

    @classmethod
    def for_stage(
        cls,
        stage: StageParams,
        epsilon_p: float,
        epsilon_q: float,
        stage_index: int,
        kron_coeff: float | None = None,
    ) -> "ChirpParams":
        gamma_bar = stage.gamma / (stage.beta_r - stage.beta_s)
        return cls(
            epsilon_p=epsilon_p,
            epsilon_q=epsilon_q,
            stage_index=stage_index,
            gamma_bar=gamma_bar,
            gamma_l=stage.gamma * stage.length,
            kron_coeff=kron_coeff,
        )


@dataclass(frozen=True, eq=False)
class ChirpProfiles:
    """Sampled pre-chirp phases (radians) and their frequency-shift slopes."""

    alpha_p: np.ndarray
    alpha_q: np.ndarray
    freq_shift_p: float
    freq_shift_q: float


def _centroid(env: Envelope) -> float:
    intensity = np.abs(env.samples) ** 2
    return float(np.sum(intensity * env.grid.times) / np.sum(intensity))


def _roll(arr: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(arr)
    if k > 0:
        out[k:] = arr[:-k]
    elif k < 0:
        out[:k] = arr[-k:]
    else:
        out[...] = arr
    return out


def prechirp_profiles(
    params: ChirpParams, pump_p: Envelope, pump_q: Envelope
) -> ChirpProfiles:
    """Evaluate the stage pre-chirp phase profiles on the pump grid.

    The pumps are taken at their launch positions; the formula's envelope
    comparisons are made co-centered (each pump's own center is its local
    time origin, which is also the collision-centered origin, since the
    pumps meet halfway through the medium).  The running integral term is
    accumulated from the left grid edge, valid for complete-collision
    geometry.

    Returns the sampled profiles, aligned to each pump's launch position,
    plus the linear-term slopes (frequency shifts) separately.

    Raises
    ------
    CollisionIncomplete
        If the pump supports overlap at the stage boundaries.
    """
    grid = pump_p.grid
    if pump_q.grid != grid:
        raise CollisionIncomplete("pumps must share one grid")
    ov = _pump_overlap(pump_p.samples, pump_q.samples)
    if ov > COLLISION_TOL:
        raise CollisionIncomplete(
            f"pump intensity overlap {ov:.3e} at the stage boundary exceeds {COLLISION_TOL:g}"
        )

    dt = grid.dt
    gb = params.gamma_bar
    gl = params.gamma_l
    kron = params.kron_coeff

    c_p = _centroid(pump_p)
    c_q = _centroid(pump_q)
    ip = np.abs(pump_p.samples) ** 2
    iq = np.abs(pump_q.samples) ** 2
    ip_peak = float(ip[int(round((c_p - grid.t_min) / dt))])
    iq_peak = float(iq[int(round((c_q - grid.t_min) / dt))])

    shift_qp = int(round((c_p - c_q) / dt))  # align q's profile onto p's center
    u_p = grid.times - c_p
    u_q = grid.times - c_q
    iq_on_p = _roll(iq, shift_qp)
    ip_on_q = _roll(ip, -shift_qp)

    freq_p = 1.5 * gb * iq_peak
    alpha_p = (
        -2.0 * gb * np.cumsum(iq_on_p - ip) * dt
        - 1.5 * gb * ip * u_p
        + freq_p * u_p
        + (params.epsilon_p - kron) * gl * ip
    )
    freq_q = -1.5 * gb * ip_peak
    alpha_q = (
        -2.0 * gb * np.cumsum(iq - ip_on_q) * dt
        + 1.5 * gb * iq * u_q
        + freq_q * u_q
        + (params.epsilon_q - kron) * gl * iq
    )
    return ChirpProfiles(
        alpha_p=alpha_p, alpha_q=alpha_q, freq_shift_p=freq_p, freq_shift_q=freq_q
    )


#: Default weight of the second-stage matching correction, calibrated for
#: complete-collision equal-width Gaussian pumps (see
#: :func:`interstage_matching_correction`).
MATCHING_CORRECTION = 1.125


def interstage_matching_correction(
    stage: StageParams, coefficient: float = MATCHING_CORRECTION
) -> tuple[np.ndarray, np.ndarray]:
    """Extra second-stage pump phases that complete the RC mode matching.

    The closed-form pre-chirp leaves a residual phase step, shaped like the
    running integral of each pump's own intensity, between the first stage's
    output Schmidt modes and the second stage's input modes.  Adding
    ``+c * 2 gamma_bar * P(t)`` to pump p and ``-c * 2 gamma_bar * Q(t)`` to
    pump q of the *second* stage cancels it; the weight c = 9/8 was
    calibrated on complete-collision Gaussian pumps and leaves the Schmidt
    coefficients untouched (pump phases never alter them).  The constant
    offsets shift the interferometric working point, which is why the
    composite optimum sits at a nonzero reported theta_0.
    """
    dt = stage.grid.dt
    gb = stage.gamma / (stage.beta_r - stage.beta_s)
    ip = np.abs(stage.pump_p.samples) ** 2
    iq = np.abs(stage.pump_q.samples) ** 2
    d_p = coefficient * 2.0 * gb * np.cumsum(ip) * dt
    d_q = -coefficient * 2.0 * gb * np.cumsum(iq) * dt
    return d_p, d_q


def phase_flatness(mode: Envelope) -> float:
    """Peak-to-peak phase (radians) over the mode's amplitude FWHM."""
    amp = np.abs(mode.samples)
    half = 0.5 * float(np.max(amp))
    region = amp >= half
    phases = np.unwrap(np.angle(mode.samples[region]))
    return float(np.max(phases) - np.min(phases))


@dataclass(frozen=True, eq=False)
class ChirpFamilyResult:
    epsilon_p: float
    epsilon_q: float
    selectivity: float
    rho_sq: np.ndarray
    flatness: dict[str, float]


def chirp_family_check(
    pairs,
    grid=None,
    tau_p: float = 0.1,
    tau_q: float = 0.1,
    gamma: float | None = None,
    target_ce: float = 0.5,
    frobenius_basis: int = 64,
) -> list[ChirpFamilyResult]:
    """Run a two-stage RC FWM cascade for each (epsilon_p, epsilon_q) pair.

    Each cascade is evaluated at its own fitted interface phase (the pump
    phase offsets shift the interferometric working point); the selectivity
    uses the propagation-exact conversion sum, and the reported flatness is
    the first-mode phase spread of each channel port.  ``pairs`` may contain
    (epsilon_p, epsilon_q) tuples or :class:`ChirpParams` (only the epsilons
    are read).  If ``gamma`` is omitted, the half stage is calibrated to
    ``target_ce`` once and the value reused for all pairs.
    """
    from . import cascade as _cascade  # deferred: cascade imports this module
    from .adjoint import StageChain, dominant_schmidt, optimal_theta, total_conversion
    from .greenfn import _shrink_to_fit

    results = []
    for pair in pairs:
        if isinstance(pair, ChirpParams):
            eps_p, eps_q = pair.epsilon_p, pair.epsilon_q
        else:
            eps_p, eps_q = pair
        spec, gamma = _cascade.make_fwm_cascade(
            grid=grid,
            tau_p=tau_p,
            tau_q=tau_q,
            gamma=gamma,
            target_ce=target_ce if gamma is None else None,
            epsilons=(eps_p, eps_q),
        )
        seed_center = 0.25 * spec.stages[0].length
        theta_star, rho1_sq = optimal_theta(
            spec.stages, seed_width=tau_p, seed_center=seed_center
        )
        chain = StageChain(spec.stages, theta=theta_star)
        ds = dominant_schmidt(
            chain, n_modes=2, seed_width=tau_p, seed_center=seed_center
        )
        g = chain.grid
        fam_w = _shrink_to_fit(g, frobenius_basis, (seed_center,), 0.6 * tau_p)
        total, _ = total_conversion(chain, frobenius_basis, fam_w, seed_center)
        flat = {
            "r_in": phase_flatness(ds.modes_r_in[0]),
            "r_out": phase_flatness(ds.modes_r_out[0]),
            "s_in": phase_flatness(ds.modes_s_in[0]),
            "s_out": phase_flatness(ds.modes_s_out[0]),
        }
        results.append(
            ChirpFamilyResult(
                epsilon_p=eps_p,
                epsilon_q=eps_q,
                selectivity=float(rho1_sq**2 / total),
                rho_sq=ds.rho_sq,
                flatness=flat,
            )
        )
    return results
