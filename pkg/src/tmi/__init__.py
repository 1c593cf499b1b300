"""Temporal-mode-selective frequency conversion toolkit.

Simulates pump-driven three- and four-wave mixing of two signal channels,
extracts the stage Green operator, Schmidt-decomposes it, and composes
multi-stage temporal-mode interferometers with calibrated per-stage
conversion, inter-stage phase control, and pump pre-chirp compensation.
"""

from . import errors
from .timegrid import (
    Envelope,
    TimeGrid,
    apply_phase,
    default_grid,
    hg_basis,
    inner_product,
    make_gaussian,
    make_hermite_gauss,
    shift,
)
from .solver import (
    FieldState,
    StageParams,
    fwm_stage,
    propagate,
    snapshot_propagate,
    stage_centers,
    twm_stage,
)
from .greenfn import (
    GreenOperator,
    SchmidtData,
    expand_in_modes,
    extract_green,
    schmidt,
    selectivity,
)
from .cascade import (
    CascadeReport,
    CascadeSpec,
    OverlapMatrix,
    calibrate_gamma,
    interface_overlaps,
    run_cascade,
    stage_count_sweep,
    zeta_sweep,
)
from .chirp import ChirpParams, chirp_family_check, prechirp_profiles

__version__ = "0.1.0"

__all__ = [
    "Envelope",
    "TimeGrid",
    "apply_phase",
    "default_grid",
    "hg_basis",
    "inner_product",
    "make_gaussian",
    "make_hermite_gauss",
    "shift",
    "FieldState",
    "StageParams",
    "fwm_stage",
    "propagate",
    "snapshot_propagate",
    "stage_centers",
    "twm_stage",
    "GreenOperator",
    "SchmidtData",
    "expand_in_modes",
    "extract_green",
    "schmidt",
    "selectivity",
    "CascadeReport",
    "CascadeSpec",
    "OverlapMatrix",
    "calibrate_gamma",
    "interface_overlaps",
    "run_cascade",
    "stage_count_sweep",
    "zeta_sweep",
    "ChirpParams",
    "chirp_family_check",
    "prechirp_profiles",
    "errors",
    "__version__",
]
