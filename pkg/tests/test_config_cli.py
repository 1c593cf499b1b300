import json
import os

import numpy as np
import pytest

from tmi.cli import main, run
from tmi.config import parse_config
from tmi.errors import MissingSection, ParseError, UnknownKey

MINIMAL = """
[stage]
zeta = 200
[cascade]
n_stages = 2
configuration = rc
[job]
type = cascade
"""


def test_defaults_fill_minimal_config():
    cfg = parse_config(MINIMAL)
    assert cfg["grid", "n_samples"] == 4096
    assert cfg["grid", "span"] == 2.0
    assert cfg["cascade", "theta"] == 0.0
    assert cfg["stage", "gamma"] is None  # calibrated to the target CE
    assert cfg.job_type == "cascade"


def test_unknown_key_names_offender():
    with pytest.raises(UnknownKey) as err:
        parse_config("[stage]\nzetta = 200\n[job]\ntype = cascade\n")
    assert "zetta" in str(err.value)
    with pytest.raises(UnknownKey):
        parse_config("[stagee]\nzeta = 200\n")


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as err:
        parse_config("[stage]\nzeta 200\n")
    assert "line 2" in str(err.value)
    with pytest.raises(ParseError) as err2:
        parse_config("[grid]\nn_samples = twelve\n[job]\ntype = cascade\n")
    assert "line 2" in str(err2.value)


def test_missing_job_section():
    with pytest.raises(MissingSection):
        parse_config("[stage]\nzeta = 200\n")
    with pytest.raises(MissingSection):
        parse_config("[job]\nbasis_size = 16\n")


def test_theta_scan_enumeration():
    cfg = parse_config(
        "[job]\ntype = theta-scan\ntheta_start = 0\ntheta_stop = 6.2832\ntheta_steps = 32\n"
    )
    thetas = np.linspace(
        cfg["job", "theta_start"], cfg["job", "theta_stop"], cfg["job", "theta_steps"]
    )
    assert thetas.size == 32


SMOKE = """
[grid]
n_samples = 1024
span = 4.0
[stage]
zeta = 12
gamma = 0.0
[job]
type = green-extract
basis_size = 8
[output]
directory = {out}
"""


def test_run_green_extract_smoke(tmp_path):
    cfg = parse_config(SMOKE.format(out=tmp_path))
    manifest = run(cfg)
    assert set(manifest.outputs) >= {"g_rr.csv", "g_rs.csv", "summary.json"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    # free advection: exactly unitary shift representation
    assert summary["unitarity_residual"] < 1e-9
    data = (tmp_path / "g_rs.csv").read_text().splitlines()
    assert data[0].startswith("#")
    mani = json.loads((tmp_path / "manifest.json").read_text())
    assert mani["job_type"] == "green-extract"
    assert mani["grid"]["n_samples"] == 1024


def test_run_reproducible_outputs(tmp_path):
    # identical config text -> bit-identical data files
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    text = SMOKE.format(out=".")
    for out in (out_a, out_b):
        run(parse_config(text), out_dir=str(out))
    for name in ("g_rs.csv", "summary.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_manifest_checksums_match_files(tmp_path):
    import hashlib

    cfg = parse_config(SMOKE.format(out=tmp_path))
    manifest = run(cfg)
    for name, digest in manifest.outputs.items():
        payload = (tmp_path / name).read_bytes()
        assert hashlib.sha256(payload).hexdigest()[:16] == digest


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[job]\ntype = nonsense\n")
    assert main(["run", str(bad)]) == 2
    missing = tmp_path / "nope.cfg"
    assert main(["run", str(missing)]) == 4
    good = tmp_path / "good.cfg"
    good.write_text(SMOKE.format(out=tmp_path / "out"))
    assert main(["run", str(good)]) == 0


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    target = tmp_path / "env_dir"
    monkeypatch.setenv("TMI_OUT_DIR", str(target))
    cfg = parse_config(SMOKE.format(out=tmp_path / "ignored"))
    run(cfg)
    assert (target / "summary.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_grid_scale_flag(tmp_path):
    cfg = parse_config(SMOKE.format(out=tmp_path))
    manifest = run(cfg, grid_scale=2)
    assert manifest.grid["n_samples"] == 2048
