"""Declarative experiment configuration.

Line-oriented ``key = value`` text with ``[section]`` headers; ``#`` or ``;``
start a comment.  Unknown sections or keys are rejected so typos fail loudly.
All sections except ``[job]`` may be omitted and fall back to the documented
defaults (grid 4096 samples over 2 walk-off windows, two-stage RC TWM at
zeta = 200 calibrated to the N-stage target CE, theta = 0).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import MissingSection, ParseError, UnknownKey

JOB_TYPES = (
    "single-stage",
    "green-extract",
    "cascade",
    "zeta-sweep",
    "n-sweep",
    "theta-scan",
    "chirp-check",
)

#: section -> {key: (type, default)}
_SCHEMA = {
    "grid": {
        "span": (float, 2.0),
        "n_samples": (int, 4096),
    },
    "stage": {
        "mixing": (str, "twm"),
        "zeta": (float, 200.0),
        "tau_p": (float, 0.1),
        "tau_q": (float, 0.1),
        "gamma": (float, None),
        "target_ce": (float, None),
        "pump_partner": (str, "s"),
        "epsilon_p": (float, 2.0),
        "epsilon_q": (float, 0.0),
        "prechirp": (bool, True),
        "matching_correction": (float, None),
    },
    "cascade": {
        "n_stages": (int, 2),
        "configuration": (str, "rc"),
        "theta": (float, 0.0),
        "polish": (bool, True),
    },
    "job": {
        "type": (str, None),
        "basis_size": (int, 32),
        "completeness_tol": (float, 2e-2),
        "zeta_values": (str, "10,25,50,100,200"),
        "n_values": (str, "2,4,6,8,10"),
        "theta_start": (float, 0.0),
        "theta_stop": (float, 6.283185307179586),
        "theta_steps": (int, 32),
        "chirp_pairs": (str, "1:0,2:0,0.5:0.5"),
    },
    "output": {
        "directory": (str, "."),
        "formats": (str, "csv,json"),
    },
}

_CHOICES = {
    ("stage", "mixing"): ("twm", "fwm"),
    ("stage", "pump_partner"): ("s", "r"),
    ("cascade", "configuration"): ("rc", "dc"),
    ("job", "type"): JOB_TYPES,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with defaults applied."""

    values: dict = field(repr=False)
    text: str = field(repr=False, default="")

    def __getitem__(self, pair):
        section, key = pair
        return self.values[section][key]

    @property
    def job_type(self) -> str:
        return self.values["job"]["type"]

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]

    def zeta_values(self) -> list[float]:
        return [float(x) for x in self.values["job"]["zeta_values"].split(",") if x.strip()]

    def n_values(self) -> list[int]:
        return [int(x) for x in self.values["job"]["n_values"].split(",") if x.strip()]

    def chirp_pairs(self) -> list[tuple[float, float]]:
        pairs = []
        for item in self.values["job"]["chirp_pairs"].split(","):
            if not item.strip():
                continue
            a, _, b = item.partition(":")
            pairs.append((float(a), float(b)))
        return pairs


def _convert(section, key, raw, line_no):
    typ, _ = _SCHEMA[section][key]
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("on", "true", "yes", "1"):
                return True
            if low in ("off", "false", "no", "0"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ParseError(f"line {line_no}: cannot parse {section}.{key} = {raw!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate declarative experiment text.

    Raises
    ------
    ParseError
        Malformed line (with line number).
    UnknownKey
        Unknown section or key (naming the offender).
    MissingSection
        Missing ``[job]`` section or required job key.
    """
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in _SCHEMA.items()}
    seen_sections = set()
    section = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"line {line_no}: unterminated section header {raw_line!r}")
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise UnknownKey(f"line {line_no}: unknown section [{section}]")
            seen_sections.add(section)
            continue
        if "=" not in line:
            raise ParseError(f"line {line_no}: expected key = value, got {raw_line!r}")
        if section is None:
            raise ParseError(f"line {line_no}: key outside any [section]")
        key, _, raw_value = line.partition("=")
        key = key.strip().lower()
        raw_value = raw_value.strip()
        if key not in _SCHEMA[section]:
            raise UnknownKey(f"line {line_no}: unknown key {key!r} in section [{section}]")
        values[section][key] = _convert(section, key, raw_value, line_no)

    if "job" not in seen_sections:
        raise MissingSection("configuration must contain a [job] section")
    if values["job"]["type"] is None:
        raise MissingSection("[job] section must set 'type'")
    for (sec, key), choices in _CHOICES.items():
        val = values[sec][key]
        if val is not None and val not in choices:
            raise ParseError(f"{sec}.{key} must be one of {choices}, got {val!r}")
    n = values["grid"]["n_samples"]
    if n < 2 or (n & (n - 1)) != 0:
        raise ParseError(f"grid.n_samples must be a power of two, got {n}")
    cfg = ExperimentConfig(values=values, text=text)
    try:
        cfg.zeta_values()
        cfg.n_values()
        cfg.chirp_pairs()
    except ValueError as exc:
        raise ParseError(f"malformed list value in [job]: {exc}") from exc
    return cfg
