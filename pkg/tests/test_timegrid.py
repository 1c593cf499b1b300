import numpy as np
import pytest

import tmi
from tmi.errors import ClippedSupport, EnergyLeak, GridMismatch, UnresolvedPulse
from tmi.timegrid import (
    Envelope,
    TimeGrid,
    default_grid,
    hg_basis,
    inner_product,
    make_gaussian,
    make_hermite_gauss,
    shift,
)


@pytest.fixture
def grid():
    return default_grid(1024, 2.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(1.0, -1.0, 512)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 1.0, 500)  # not a power of two
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 1.0, 1)
    g = TimeGrid(-1.0, 1.0, 512)
    assert g.dt == pytest.approx(2.0 / 512)
    assert g.times[0] == pytest.approx(-1.0)


def test_gaussian_normalization_and_peak(grid):
    e = make_gaussian(grid, 0.0, 0.05)
    assert e.energy() == pytest.approx(1.0, abs=1e-10)
    peak = (np.pi * 0.05**2) ** (-0.25)
    mid = np.argmin(np.abs(grid.times))
    assert abs(e.samples[mid]) == pytest.approx(peak, rel=1e-12)


def test_gaussian_offset_overlap(grid):
    # closed-form overlap of two unit Gaussians offset by one width
    tau = 0.05
    a = make_gaussian(grid, 0.0, tau)
    b = make_gaussian(grid, tau, tau)
    assert abs(inner_product(a, b)) == pytest.approx(np.exp(-0.25), abs=1e-6)


def test_gaussian_errors(grid):
    with pytest.raises(UnresolvedPulse):
        make_gaussian(grid, 0.0, 2.0 * grid.dt)
    with pytest.raises(ClippedSupport):
        make_gaussian(grid, 0.95, 0.05)


def test_hermite_gauss_order_zero_matches_gaussian(grid):
    hg0 = make_hermite_gauss(grid, 0, 0.05, 0.1)
    g0 = make_gaussian(grid, 0.1, 0.05)
    assert np.max(np.abs(hg0.samples - g0.samples)) < 1e-12


def test_hermite_gauss_orthonormal(grid):
    fam = hg_basis(grid, 11, 0.05, 0.0)
    gram = np.array([[inner_product(a, b) for b in fam] for a in fam])
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_hg1_odd_symmetry(grid):
    hg1 = make_hermite_gauss(grid, 1, 0.05, 0.0)
    mid = np.argmin(np.abs(grid.times))
    assert abs(hg1.samples[mid]) < 1e-12


def test_hg_order_cap(grid):
    with pytest.raises(ValueError):
        make_hermite_gauss(grid, 25, 0.05)
    make_hermite_gauss(grid, 25, 0.05, max_order=None)  # explicit override


def test_inner_product_conventions(grid):
    f = make_gaussian(grid, 0.0, 0.05)
    assert inner_product(f, f) == pytest.approx(f.energy())
    hg0 = make_hermite_gauss(grid, 0, 0.05, 0.0)
    hg2 = make_hermite_gauss(grid, 2, 0.05, 0.0)
    assert abs(inner_product(hg0, hg2)) < 1e-8
    fi = Envelope(grid, 1j * f.samples)
    assert inner_product(fi, f) == pytest.approx(-1j * f.energy())
    other = default_grid(512, 2.0)
    with pytest.raises(GridMismatch):
        inner_product(f, make_gaussian(other, 0.0, 0.05))


def test_shift_roundtrip_and_leak(grid):
    e = make_gaussian(grid, 0.0, 0.05)
    assert shift(e, 0) is e
    moved = shift(e, 37)
    assert moved.energy() == pytest.approx(e.energy(), rel=1e-12)
    back = shift(moved, -37)
    # round trip exact where support is interior (clipped tails are ~1e-86)
    assert np.allclose(back.samples, e.samples, atol=1e-30, rtol=0.0)
    with pytest.raises(EnergyLeak):
        shift(e, 500)  # pushes the Gaussian into the boundary


def test_parseval(grid):
    e = make_gaussian(grid, 0.1, 0.07)
    spec = np.fft.fft(e.samples)
    energy_freq = np.sum(np.abs(spec) ** 2) * grid.dt / grid.n_samples
    assert energy_freq == pytest.approx(e.energy(), abs=1e-10)


def test_envelope_immutable(grid):
    e = make_gaussian(grid, 0.0, 0.05)
    with pytest.raises(ValueError):
        e.samples[0] = 1.0
