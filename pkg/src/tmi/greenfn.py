"""Stage Green operator: extraction from test-signal propagations, SVD
(Schmidt) analysis, and figures of merit.

The linear input->output map of the two signal channels is represented on
four Hermite-Gaussian spanning sets (one per channel and port).  Propagating
each basis function of each input channel (the other channel empty) fills one
column of the block matrix

    [[G_rr, G_rs],
     [G_sr, G_ss]]

whose blocks map input-basis coefficients to output-basis coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BasisIncomplete, InvalidCoefficient, PairingFailure
from .solver import StageParams, propagate_arrays, stage_centers
from .timegrid import Envelope, TimeGrid, hg_basis, inner_product

#: Per-column captured-energy tolerance for the expansion bases.
COMPLETENESS_TOL = 1e-3
#: Modes whose rho^2 + tau^2 deviates from 1 by more than this are dropped
#: as basis-edge artifacts.
RETENTION_TOL = 1e-2


@dataclass(frozen=True, eq=False)
class GreenOperator:
    """Discretized stage Green operator in Hermite-Gaussian representation.

    ``edge_guard`` top orders per channel are treated as sacrificial: strong
    pump phase modulation mixes the highest represented orders into
    unrepresented ones, so those columns sit outside the subspace the basis
    resolves and are excluded from the unitarity diagnostic.
    """

    grid: TimeGrid
    G_rr: np.ndarray
    G_rs: np.ndarray
    G_sr: np.ndarray
    G_ss: np.ndarray
    basis_r_in: list[Envelope]
    basis_s_in: list[Envelope]
    basis_r_out: list[Envelope]
    basis_s_out: list[Envelope]
    column_residuals: np.ndarray | None = field(default=None, repr=False)
    edge_guard: int = 0

    @property
    def n_r(self) -> int:
        return len(self.basis_r_in)

    @property
    def n_s(self) -> int:
        return len(self.basis_s_in)

    def block(self) -> np.ndarray:
        """Assembled (n_r + n_s) square block matrix."""
        return np.block([[self.G_rr, self.G_rs], [self.G_sr, self.G_ss]])

    def _resolved_columns(self) -> np.ndarray:
        k_r, k_s = self.n_r, self.n_s
        mask = np.ones(k_r + k_s, dtype=bool)
        if self.edge_guard > 0:
            mask[k_r - self.edge_guard : k_r] = False
            mask[k_r + k_s - self.edge_guard :] = False
        return mask

    def singular_values(self) -> np.ndarray:
        """Singular values on the basis-resolved input subspace."""
        return np.linalg.svd(self.block()[:, self._resolved_columns()], compute_uv=False)

    def unitarity_residual(self) -> float:
        """Largest deviation of a resolved-subspace singular value from 1."""
        return float(np.max(np.abs(self.singular_values() - 1.0)))

    @property
    def worst_residual(self) -> float:
        if self.column_residuals is None:
            return 0.0
        return float(np.max(self.column_residuals))


@dataclass(frozen=True, eq=False)
class SchmidtData:
    """Paired singular system of a stage (or composite) Green operator.

    ``rho[n]`` is the conversion amplitude of mode n, ``tau[n]`` the
    transmission amplitude; the input/output mode families are index-paired
    across the two channels by the beam-splitter structure of the operator.
    """

    rho: np.ndarray
    tau: np.ndarray
    modes_r_in: list[Envelope]
    modes_s_in: list[Envelope]
    modes_r_out: list[Envelope]
    modes_s_out: list[Envelope]
    selectivity: float
    #: coefficient-space singular vectors, kept for composition/diagnostics
    coeff_r_in: np.ndarray = field(default=None, repr=False)
    coeff_s_in: np.ndarray = field(default=None, repr=False)
    coeff_r_out: np.ndarray = field(default=None, repr=False)
    coeff_s_out: np.ndarray = field(default=None, repr=False)

    @property
    def rho_sq(self) -> np.ndarray:
        return self.rho**2

    @property
    def tau_sq(self) -> np.ndarray:
        return self.tau**2


def _pump_width(pump: Envelope) -> float:
    """RMS-based amplitude width (exact tau for a Gaussian envelope)."""
    intensity = np.abs(pump.samples) ** 2
    w = intensity / np.sum(intensity)
    t = pump.grid.times
    mean = float(np.sum(w * t))
    var = float(np.sum(w * (t - mean) ** 2))
    return np.sqrt(2.0 * var)


def default_basis_widths(stage: StageParams, basis_size: int) -> tuple[float, float]:
    """Default Hermite-Gaussian family widths (w_r, w_s) for a stage.

    Pump-matched channels use the matching pump's width.  The TWM cross
    channel collects conversion smeared over the full walk-off window, so its
    family width is chosen to make the highest retained order just span that
    window.
    """
    tau_p = _pump_width(stage.pump_p)
    if stage.delta_F == 1:
        # pump phase modulation spreads mode content across many orders, so
        # both channels get the widest family that fits the grid
        grid = stage.grid
        margin = min(
            0.25 * stage.length - grid.t_min, grid.t_max - 0.25 * stage.length
        )
        w = margin / (np.sqrt(2.0 * basis_size - 1.0) + 3.5)
        return w, w
    extent = 0.5 * stage.length + 4.0 * tau_p
    w_cross = extent / np.sqrt(2.0 * basis_size - 1.0)
    if stage.pump_partner == "s":
        return w_cross, tau_p
    return tau_p, w_cross


def _shrink_to_fit(grid: TimeGrid, size: int, centers: tuple[float, ...], width: float) -> float:
    """Largest width <= the requested one whose top basis order fits the grid."""
    from .timegrid import make_hermite_gauss
    from .errors import ClippedSupport

    w = width
    for _ in range(60):
        try:
            for c in centers:
                make_hermite_gauss(grid, size - 1, w, c, max_order=None)
            return w
        except ClippedSupport:
            w *= 0.97
    raise ClippedSupport(
        f"no basis width below {width:g} fits the grid for size {size}"
    )


def extract_green(
    stage: StageParams,
    basis_size: int = 32,
    basis_width: float | None = None,
    cross_width: float | None = None,
    completeness_tol: float | None = COMPLETENESS_TOL,
    n_substeps: int = 1,
    edge_guard: int | None = None,
) -> GreenOperator:
    """Fill the stage Green operator by propagating basis test signals.

    Each Hermite-Gaussian basis function of each input channel (the other
    channel empty) is propagated once; expanding the outputs in the output
    bases yields one column of the block matrix.  All columns are propagated
    in a single batched solver pass.

    Parameters
    ----------
    basis_size : int
        Modes per channel (>= 8).
    basis_width : float, optional
        Width of the pump-matched channel family; defaults to the pump width.
    cross_width : float, optional
        Width of the cross-channel family; defaults per
        :func:`default_basis_widths`.
    completeness_tol : float, optional
        Per-column captured-energy tolerance; ``None`` disables the check.
    edge_guard : int, optional
        Sacrificial top orders per channel, excluded from the completeness
        gate and the unitarity diagnostic (defaults to 4 for FWM stages,
        whose pump phase modulation always spills the highest orders, and 0
        for TWM).

    Raises
    ------
    BasisIncomplete
        If any resolved column's output energy is captured to less than
        ``1 - completeness_tol``.
    """
    if basis_size < 8:
        raise ValueError("basis_size must be at least 8")
    if edge_guard is None:
        edge_guard = 4 if stage.delta_F == 1 else 0
    grid = stage.grid
    centers = stage_centers(stage)
    w_r_default, w_s_default = default_basis_widths(stage, basis_size)
    w_r_default = _shrink_to_fit(grid, basis_size, (centers["r_in"], centers["r_out"]), w_r_default)
    w_s_default = _shrink_to_fit(grid, basis_size, (centers["s_in"], centers["s_out"]), w_s_default)
    if stage.pump_partner == "s":
        w_s = basis_width if basis_width is not None else w_s_default
        w_r = cross_width if cross_width is not None else w_r_default
    else:
        w_r = basis_width if basis_width is not None else w_r_default
        w_s = cross_width if cross_width is not None else w_s_default
    basis_r_in = hg_basis(grid, basis_size, w_r, centers["r_in"])
    basis_r_out = hg_basis(grid, basis_size, w_r, centers["r_out"])
    basis_s_in = hg_basis(grid, basis_size, w_s, centers["s_in"])
    basis_s_out = hg_basis(grid, basis_size, w_s, centers["s_out"])

    Br_in = np.column_stack([e.samples for e in basis_r_in])
    Bs_in = np.column_stack([e.samples for e in basis_s_in])
    Br_out = np.column_stack([e.samples for e in basis_r_out])
    Bs_out = np.column_stack([e.samples for e in basis_s_out])

    n = grid.n_samples
    k = basis_size
    r0 = np.zeros((n, 2 * k), dtype=np.complex128)
    s0 = np.zeros((n, 2 * k), dtype=np.complex128)
    r0[:, :k] = Br_in
    s0[:, k:] = Bs_in

    res = propagate_arrays(stage, r0, s0, n_substeps=n_substeps)

    dt = grid.dt
    proj_r = Br_out.conj().T @ res.r * dt  # (k, 2k)
    proj_s = Bs_out.conj().T @ res.s * dt

    captured = np.sum(np.abs(proj_r) ** 2, axis=0) + np.sum(np.abs(proj_s) ** 2, axis=0)
    propagated = (
        np.sum(np.abs(res.r) ** 2, axis=0) + np.sum(np.abs(res.s) ** 2, axis=0)
    ) * dt
    residuals = 1.0 - captured / propagated
    if completeness_tol is not None:
        mask = np.ones(2 * k, dtype=bool)
        if edge_guard > 0:
            mask[k - edge_guard : k] = False
            mask[2 * k - edge_guard :] = False
        worst = float(np.max(residuals[mask]))
        if worst > completeness_tol:
            j = int(np.arange(2 * k)[mask][np.argmax(residuals[mask])])
            chan = "r" if j < k else "s"
            raise BasisIncomplete(
                f"column {j % k} of channel {chan} captured only "
                f"{captured[j] / propagated[j]:.6f} of the propagated energy "
                f"(residual tolerance {completeness_tol:g})"
            )

    return GreenOperator(
        grid=grid,
        G_rr=proj_r[:, :k],
        G_rs=proj_r[:, k:],
        G_sr=proj_s[:, :k],
        G_ss=proj_s[:, k:],
        basis_r_in=basis_r_in,
        basis_s_in=basis_s_in,
        basis_r_out=basis_r_out,
        basis_s_out=basis_s_out,
        column_residuals=residuals,
        edge_guard=edge_guard,
    )


def _fix_phase(coeff_in: np.ndarray, coeff_out: np.ndarray, basis_in: np.ndarray):
    """Rotate an input mode so its largest-|.| sample is real positive.

    The paired output mode absorbs the same rotation so the dyadic product
    is unchanged.
    """
    mode = basis_in @ coeff_in
    j = int(np.argmax(np.abs(mode)))
    ph = mode[j]
    if abs(ph) == 0.0:
        return coeff_in, coeff_out
    rot = np.conj(ph) / abs(ph)
    return coeff_in * rot, coeff_out * rot


def schmidt(
    G: GreenOperator,
    retention_tol: float = RETENTION_TOL,
    strict_pairing: bool = True,
) -> SchmidtData:
    """Schmidt-decompose a Green operator into paired mode families.

    The conversion kernel ``G_rs`` is SVD'd for the conversion amplitudes
    ``rho_n``, the r-output modes and the s-input modes; the transmission
    amplitudes ``tau_n`` and the paired r-input / s-output modes are
    recovered by projecting through ``G_rr`` and ``G_ss`` (which preserves
    the pairing even when tau values are near-degenerate).  Modes whose
    ``rho^2 + tau^2`` deviates from 1 by more than ``retention_tol`` are
    dropped as basis-edge artifacts.

    Raises
    ------
    PairingFailure
        If the two independent tau estimates disagree beyond 1e-2 for a
        retained mode.
    """
    U, rho, Vh = np.linalg.svd(G.G_rs)
    k = rho.size
    grid = G.grid
    Br_in = np.column_stack([e.samples for e in G.basis_r_in])
    Bs_in = np.column_stack([e.samples for e in G.basis_s_in])
    Br_out = np.column_stack([e.samples for e in G.basis_r_out])
    Bs_out = np.column_stack([e.samples for e in G.basis_s_out])

    keep: list[int] = []
    rho_list, tau_list = [], []
    c_r_in, c_s_in, c_r_out, c_s_out = [], [], [], []
    for n_mode in range(k):
        u = U[:, n_mode]  # r-out coefficients
        v = Vh[n_mode, :].conj()  # s-in coefficients
        v, u = _fix_phase(v, u, Bs_in)

        w_r = G.G_rr.conj().T @ u  # tau_n * psi_n  (r-in)
        w_s = G.G_ss @ v  # tau_n * Phi_n  (s-out)
        tau_r = float(np.linalg.norm(w_r))
        tau_s = float(np.linalg.norm(w_s))
        tau_n = tau_s
        closure = rho[n_mode] ** 2 + tau_n**2
        if abs(closure - 1.0) > retention_tol and rho[n_mode] ** 2 < 0.01:
            # basis-edge artifact: negligible conversion weight and the
            # beam-splitter closure fails
            continue
        if strict_pairing and rho[n_mode] ** 2 > 0.01 and abs(tau_r - tau_s) > 0.05:
            # the two independent recoveries of the transmission amplitude
            # disagree: the cross-channel pairing cannot be trusted
            raise PairingFailure(
                f"mode {n_mode}: tau from G_rr ({tau_r:.4f}) and G_ss "
                f"({tau_s:.4f}) disagree beyond 0.05"
            )
        # psi and Phi keep the phases dictated by G_rr and G_ss: once the
        # (phi, Psi) pair is fixed, the unitary structure leaves no freedom.
        psi = w_r / tau_r if tau_r > 0 else np.zeros_like(w_r)
        phi_out = w_s / tau_s if tau_s > 0 else np.zeros_like(w_s)
        keep.append(n_mode)
        rho_list.append(float(rho[n_mode]))
        tau_list.append(tau_n)
        c_r_in.append(psi)
        c_s_in.append(v)
        c_r_out.append(u)
        c_s_out.append(phi_out)

    rho_arr = np.asarray(rho_list)
    tau_arr = np.asarray(tau_list)
    sel = selectivity(rho_arr) if rho_arr.size else 0.0

    def envelopes(basis_mat, coeffs):
        return [Envelope(grid, basis_mat @ c) for c in coeffs]

    return SchmidtData(
        rho=rho_arr,
        tau=tau_arr,
        modes_r_in=envelopes(Br_in, c_r_in),
        modes_s_in=envelopes(Bs_in, c_s_in),
        modes_r_out=envelopes(Br_out, c_r_out),
        modes_s_out=envelopes(Bs_out, c_s_out),
        selectivity=sel,
        coeff_r_in=np.column_stack(c_r_in) if c_r_in else np.zeros((G.n_r, 0)),
        coeff_s_in=np.column_stack(c_s_in) if c_s_in else np.zeros((G.n_s, 0)),
        coeff_r_out=np.column_stack(c_r_out) if c_r_out else np.zeros((G.n_r, 0)),
        coeff_s_out=np.column_stack(c_s_out) if c_s_out else np.zeros((G.n_s, 0)),
    )


def selectivity(rho) -> float:
    """Figure of merit ``rho_1^4 / sum_j rho_j^2`` (0 for a null operator)."""
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        return 0.0
    if np.any(rho < -1e-12) or np.any(rho > 1.0 + 1e-9):
        raise InvalidCoefficient("Schmidt coefficients must lie in [0, 1]")
    total = float(np.sum(rho**2))
    if total == 0.0:
        return 0.0
    return float(np.max(rho) ** 4 / total)


def expand_in_modes(
    field_env: Envelope, modes: list[Envelope]
) -> tuple[np.ndarray, float]:
    """Expansion coefficients ``c_n = <mode_n, field>`` and residual energy.

    The modes are assumed orthonormal; the residual quantifies whatever part
    of the field they do not span.
    """
    coeffs = np.array([inner_product(m, field_env) for m in modes])
    residual = field_env.energy() - float(np.sum(np.abs(coeffs) ** 2))
    return coeffs, residual
