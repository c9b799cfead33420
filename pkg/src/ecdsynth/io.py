"""Unit parsing, target specifications, config files and run manifests.

Frequencies in configs are ``value+unit`` strings quoted as f = omega / 2pi
("33khz"); they are converted to angular frequency here and nowhere else.
Decay rates are plain 1/s values ("6.67hz") or lifetimes ("150ms").
"""
from __future__ import annotations

import datetime
import hashlib
import json
import platform
import re
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
TWO_PI = 2 * np.pi

_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"


class ConfigError(ValueError):
    """Malformed configuration or command-line value (exit code 2)."""


def _split(value: str, units: dict, what: str) -> tuple[float, str]:
    m = re.fullmatch(_NUM + r"\s*([a-zµ]*)", str(value).strip().lower())
    if not m or m.group(2) not in units:
        raise ConfigError(f"cannot parse {what} {value!r}; expected a number with one of {sorted(units)}")
    return float(m.group(1)), m.group(2)


def parse_frequency(value) -> float:
    """``"33khz"`` -> 2 pi 33e3 rad/s.  Bare numbers are taken as already angular."""
    if isinstance(value, (int, float)):
        return float(value)
    x, u = _split(value, _FREQ, "frequency")
    return TWO_PI * x * _FREQ[u]


def parse_time(value) -> float:
    """``"150ms"`` -> 0.15 s.  Bare numbers are seconds."""
    if isinstance(value, (int, float)):
        return float(value)
    x, u = _split(value, _TIME, "time")
    return x * _TIME[u]


def parse_rate(value) -> float:
    """Decay rate in 1/s: ``"6.67hz"`` -> 6.67, ``"150ms"`` -> 1/0.15 (no 2 pi)."""
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip().lower()
    if s.endswith("hz"):
        x, u = _split(s, _FREQ, "rate")
        return x * _FREQ[u]
    t = parse_time(s)
    if t <= 0:
        raise ConfigError(f"lifetime must be positive, got {value!r}")
    return 1.0 / t


def parse_range(text: str) -> list[int]:
    """``"1..6"`` -> [1, ..., 6]; ``"3"`` -> [3]."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+))?\s*", str(text))
    if not m:
        raise ConfigError(f"bad range {text!r}; expected 'a..b' or an integer")
    a = int(m.group(1))
    b = int(m.group(2)) if m.group(2) else a
    if b < a:
        raise ConfigError(f"empty range {text!r}")
    return list(range(a, b + 1))


# -- system parameters ------------------------------------------------------------

_SYS_FREQ = ("chi", "chi_prime", "kerr", "anharmonicity", "delta", "drive_max")
_SYS_TIME = ("sigma_d", "t_d", "sigma_q", "t_q", "dt")


def system_from_dict(data: dict):
    """SystemParams from a config mapping; unit strings are converted, unknown keys rejected."""
    from .pulses import SystemParams

    known = set(_SYS_FREQ) | set(_SYS_TIME) | {"kappa"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown system keys: {sorted(extra)}")
    kw = {}
    for k, v in data.items():
        if v is None:
            kw[k] = None
        elif k in _SYS_FREQ:
            kw[k] = parse_frequency(v)
        elif k in _SYS_TIME:
            kw[k] = parse_time(v)
        else:
            kw[k] = parse_rate(v)
    try:
        return SystemParams(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from e


# -- target specifications ----------------------------------------------------------

def parse_target(spec: str, n_osc: int, delta: float = 0.306) -> np.ndarray:
    """Oscillator ket from ``kind:arg``.

    Kinds: ``fock:3``, ``coherent:1.5``, ``squeezed:10db``, ``binomial:+Z``,
    ``gkp:+Z`` (uses ``delta``).
    """
    from .codes import binomial_codewords, gkp_logical_states
    from .fock import coherent_state, fock_state, squeezed_vacuum, zeta_from_db

    kind, _, arg = str(spec).partition(":")
    kind = kind.strip().lower()
    arg = arg.strip()
    try:
        if kind == "fock":
            return fock_state(int(arg), n_osc)
        if kind == "coherent":
            return coherent_state(complex(arg), n_osc)
        if kind == "squeezed":
            db = arg.lower()
            return squeezed_vacuum(zeta_from_db(float(db[:-2] if db.endswith("db") else db)), n_osc)
        if kind == "binomial":
            return binomial_codewords(n_osc).cardinal(arg)
        if kind == "gkp":
            return gkp_logical_states(delta, n_osc).cardinal(arg)
    except (ValueError, IndexError) as e:
        raise ConfigError(f"bad target {spec!r}: {e}") from e
    raise ConfigError(f"bad target {spec!r}; kinds are fock, coherent, squeezed, binomial, gkp")


# -- files ----------------------------------------------------------------------------

def load_config(path, allowed: set) -> dict:
    """JSON config whose keys must be a subset of ``allowed`` (plus ``schema``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = data.pop("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema version {version}")
    extra = set(data) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")
    return data


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def write_manifest(run_dir, command: str, config: dict, seeds=(), inputs=(), outputs=()) -> Path:
    """Record config, seeds, versions and sha256 hashes of every input and output file."""
    import scipy

    run_dir = Path(run_dir)
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seeds": list(seeds),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
        "versions": {"ecdsynth": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    return write_json(run_dir / f"manifest_{command}.json", manifest)
