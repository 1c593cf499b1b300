"""Shared time discretization, complex envelopes, and Hermite-Gauss bases.

All times are measured in walk-off units: the full temporal slip between the
two signal channels over one medium length is 1.0, and the medium length
itself is the longitudinal unit.  A pump of width ``tau_p`` therefore
corresponds to ``zeta = 1 / tau_p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ClippedSupport, EnergyLeak, GridMismatch, UnresolvedPulse

#: Default ceiling on Hermite-Gauss mode order (guards against accidentally
#: requesting orders whose oscillations the default grids cannot resolve).
DEFAULT_MAX_ORDER = 19


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid over ``[t_min, t_max)`` with ``n_samples`` points.

    ``n_samples`` must be a power of two; the spacing is
    ``dt = (t_max - t_min) / n_samples`` and sample ``k`` sits at
    ``t_min + k * dt`` (left-closed convention, so periodic FFTs and integer
    shifts stay consistent).
    """

    t_min: float
    t_max: float
    n_samples: int

    def __post_init__(self):
        if not self.t_max > self.t_min:
            raise ValueError(f"t_max must exceed t_min, got [{self.t_min}, {self.t_max}]")
        n = self.n_samples
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_samples must be a power of two >= 2, got {n}")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / self.n_samples

    @property
    def span(self) -> float:
        return self.t_max - self.t_min

    @cached_property
    def times(self) -> np.ndarray:
        t = self.t_min + self.dt * np.arange(self.n_samples)
        t.flags.writeable = False
        return t


@dataclass(frozen=True, eq=False)
class Envelope:
    """Complex field envelope sampled on a :class:`TimeGrid`.

    Samples carry units of (time)^(-1/2) so ``sum(|a|^2) * dt`` is a
    dimensionless energy; unit-normalized envelopes have energy 1.
    """

    grid: TimeGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.shape != (self.grid.n_samples,):
            raise ValueError(
                f"samples shape {arr.shape} does not match grid ({self.grid.n_samples},)"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def energy(self) -> float:
        """L2 norm squared, ``sum(|a|^2) * dt``."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def with_samples(self, samples: np.ndarray) -> "Envelope":
        """New envelope on the same grid."""
        return Envelope(self.grid, samples)


def default_grid(n_samples: int = 4096, span: float = 2.0) -> TimeGrid:
    """Grid of ``span`` walk-off windows centered on the collision (t = 0)."""
    return TimeGrid(-span / 2.0, span / 2.0, n_samples)


def make_gaussian(grid: TimeGrid, center: float, tau_p: float) -> Envelope:
    """Unit-energy Gaussian ``(pi tau_p^2)^(-1/4) exp(-(t-center)^2 / (2 tau_p^2))``.

    ``tau_p`` is the width in the amplitude exponent (zeta = 1/tau_p in
    walk-off units).

    Raises
    ------
    UnresolvedPulse
        If ``tau_p <= 4 dt``.
    ClippedSupport
        If the boundary amplitude exceeds 1e-8 of the peak.
    """
    if tau_p <= 4.0 * grid.dt:
        raise UnresolvedPulse(
            f"tau_p = {tau_p:g} <= 4 dt = {4 * grid.dt:g}; refine the grid"
        )
    t = grid.times
    amp = (np.pi * tau_p**2) ** (-0.25) * np.exp(-((t - center) ** 2) / (2.0 * tau_p**2))
    _check_support(amp)
    return Envelope(grid, amp.astype(np.complex128))


def make_hermite_gauss(
    grid: TimeGrid,
    order: int,
    tau: float,
    center: float = 0.0,
    max_order: int | None = DEFAULT_MAX_ORDER,
) -> Envelope:
    """Orthonormal Hermite-Gaussian mode of the given order.

    Order 0 coincides with :func:`make_gaussian`.  Pass ``max_order=None``
    (or a larger cap) to exceed the default ceiling of 19.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    if max_order is not None and order > max_order:
        raise ValueError(f"order {order} exceeds max_order {max_order}")
    if tau <= 4.0 * grid.dt:
        raise UnresolvedPulse(f"tau = {tau:g} <= 4 dt = {4 * grid.dt:g}; refine the grid")
    x = (grid.times - center) / tau
    h = _hermite_functions(x, order)
    amp = h[order] / np.sqrt(tau)
    _check_support(np.abs(amp))
    return Envelope(grid, amp.astype(np.complex128))


def hg_basis(
    grid: TimeGrid,
    size: int,
    tau: float,
    center: float = 0.0,
) -> list[Envelope]:
    """First ``size`` Hermite-Gaussian modes as a list of envelopes."""
    if size < 1:
        raise ValueError("size must be positive")
    if tau <= 4.0 * grid.dt:
        raise UnresolvedPulse(f"tau = {tau:g} <= 4 dt = {4 * grid.dt:g}; refine the grid")
    x = (grid.times - center) / tau
    h = _hermite_functions(x, size - 1)
    out = []
    for n in range(size):
        amp = h[n] / np.sqrt(tau)
        _check_support(np.abs(amp))
        out.append(Envelope(grid, amp.astype(np.complex128)))
    return out


def _hermite_functions(x: np.ndarray, n_max: int) -> np.ndarray:
    """Orthonormal Hermite functions h_0..h_n_max evaluated at x.

    Normalized three-term recurrence; stable for the orders used here.
    """
    h = np.zeros((n_max + 1, x.size))
    h[0] = np.pi ** (-0.25) * np.exp(-0.5 * x**2)
    if n_max >= 1:
        h[1] = np.sqrt(2.0) * x * h[0]
    for n in range(2, n_max + 1):
        h[n] = x * np.sqrt(2.0 / n) * h[n - 1] - np.sqrt((n - 1) / n) * h[n - 2]
    return h


def _check_support(amp: np.ndarray):
    peak = float(np.max(amp))
    if peak == 0.0:
        return
    edge = max(float(amp[0]), float(amp[-1]))
    if edge > 1e-8 * peak:
        raise ClippedSupport(
            f"boundary amplitude {edge:.3e} exceeds 1e-8 of peak {peak:.3e}"
        )


def inner_product(a: Envelope, b: Envelope) -> complex:
    """Discrete L2 inner product ``sum(conj(a) * b) * dt``.

    Conjugate-linear in the first argument.
    """
    if a.grid != b.grid:
        raise GridMismatch("envelopes live on different grids")
    return complex(np.sum(np.conj(a.samples) * b.samples) * a.grid.dt)


def shift(e: Envelope, k: int) -> Envelope:
    """Move samples by ``k`` positions, zero-filling vacated slots.

    Positive ``k`` delays the envelope (moves it toward larger t).

    Raises
    ------
    EnergyLeak
        If the discarded boundary energy exceeds 1e-8 of the total.
    """
    n = e.grid.n_samples
    if abs(k) >= n:
        raise ValueError(f"|k| = {abs(k)} must be < n_samples = {n}")
    if k == 0:
        return e
    total = float(np.sum(np.abs(e.samples) ** 2))
    if k > 0:
        lost = float(np.sum(np.abs(e.samples[n - k :]) ** 2))
    else:
        lost = float(np.sum(np.abs(e.samples[: -k]) ** 2))
    if total > 0.0 and lost > 1e-8 * total:
        raise EnergyLeak(f"shift by {k} discards {lost / total:.3e} of the energy")
    out = shift_array(e.samples, k)
    return Envelope(e.grid, out)


def shift_array(arr: np.ndarray, k: int) -> np.ndarray:
    """Zero-inflow shift of a sample array (leading axis), no leak check."""
    out = np.zeros_like(arr)
    if k > 0:
        out[k:] = arr[:-k]
    elif k < 0:
        out[:k] = arr[-k:]
    else:
        out[...] = arr
    return out


def apply_phase(e: Envelope, phase: np.ndarray | float) -> Envelope:
    """Multiply an envelope by ``exp(i * phase)`` (scalar or sampled profile)."""
    return Envelope(e.grid, e.samples * np.exp(1j * np.asarray(phase)))
