"""Shared fixtures for the full-scale acceptance runs.

Everything here operates at desk scale (4096 samples over two walk-off
windows); the expensive calibrations are session-scoped so the acceptance
criteria share them.
"""

import numpy as np
import pytest

from tmi.adjoint import StageChain, direct_schmidt_analysis
from tmi.cascade import (
    _interface_shifts,
    calibrate_gamma,
    make_fwm_cascade,
    make_twm_cascade,
    run_cascade,
)
from tmi.solver import fwm_stage, twm_stage
from tmi.timegrid import default_grid

ACCEPT_BASIS = 32


def report(criterion: str, ok: bool, detail: str):
    flag = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {criterion}: {flag} - {detail}")


@pytest.fixture(scope="session")
def grid4096():
    return default_grid(4096, 2.0)


@pytest.fixture(scope="session")
def gamma50_twm(grid4096):
    return calibrate_gamma(twm_stage(grid4096, 200.0, 1.0), 0.5, gamma_hint=0.8)


@pytest.fixture(scope="session")
def rc_spec(grid4096, gamma50_twm):
    spec, _ = make_twm_cascade(
        grid4096, zeta=200.0, gamma=gamma50_twm, n_stages=2, configuration="rc"
    )
    return spec


@pytest.fixture(scope="session")
def dc_spec(grid4096, gamma50_twm):
    spec, _ = make_twm_cascade(
        grid4096, zeta=200.0, gamma=gamma50_twm, n_stages=2, configuration="dc"
    )
    return spec


@pytest.fixture(scope="session")
def rc_report(rc_spec):
    return run_cascade(rc_spec, basis_size=ACCEPT_BASIS, completeness_tol=None)


@pytest.fixture(scope="session")
def dc_report(dc_spec):
    return run_cascade(dc_spec, basis_size=ACCEPT_BASIS, completeness_tol=None)


@pytest.fixture(scope="session")
def rc_direct(rc_spec):
    chain = StageChain(rc_spec.stages, theta=0.0, interface_shifts=_interface_shifts(rc_spec))
    return direct_schmidt_analysis(
        chain, n_modes=4, seed_width=0.005, seed_center=0.25, frobenius_basis=40
    )


@pytest.fixture(scope="session")
def dc_direct(dc_spec):
    chain = StageChain(dc_spec.stages, theta=0.0, interface_shifts=_interface_shifts(dc_spec))
    return direct_schmidt_analysis(
        chain, n_modes=4, seed_width=0.005, seed_center=0.25, frobenius_basis=40
    )


@pytest.fixture(scope="session")
def gamma50_fwm(grid4096):
    return calibrate_gamma(fwm_stage(grid4096, 0.1, 0.1, 1.0), 0.5, gamma_hint=0.8)


@pytest.fixture(scope="session")
def fwm_spec(grid4096, gamma50_fwm):
    spec, _ = make_fwm_cascade(grid4096, gamma=gamma50_fwm, epsilons=(2.0, 0.0))
    return spec
