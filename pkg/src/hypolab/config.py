"""Plain-text experiment configuration.

A config is an INI file with up to five sections::

    [operator]
    family = grushin_rectangle
    gamma = 1
    grid_n = 2049
    fourier_indices = 20:81        ; start:stop, or a comma list

    [region]
    x1_range = 0.3, 0.9

    [transmute]
    S = 0.5

    [experiment]
    name = tunneling
    seed = 0

    [tolerances]
    ode_step = 1e-3

Every section and key is optional. Missing operator / experiment keys fall back
to per-experiment defaults (``EXPERIMENT_DEFAULTS``) that reproduce the
reference runs. Errors carry the line number and the offending field name.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import HypolabError
from .evolution import ObservationRegion
from .numerics import DEFAULT_TOLERANCES
from .spectral import OperatorSpec
from .transmutation import TransmuteParams

EXPERIMENTS = ("spectrum", "tunneling", "geodesics", "transmute", "lowfreq_cost", "parabolic",
               "gevrey", "frequency_cost", "subelliptic", "accept_all")

_LOW = {"gamma": 1, "grid_n": 1025, "fourier_max": 100, "branch_max": 8, "lambda_cutoff": 300.0}

# operator overrides and experiment parameters used when the config is silent
EXPERIMENT_DEFAULTS = {
    "spectrum": ({"gamma": 1, "grid_n": 1025, "fourier_max": 16, "branch_max": 1}, {}),
    "tunneling": ({"gamma": 1, "grid_n": 2049, "fourier_indices": tuple(range(20, 81))},
                  {"powers": (1.0, 1.5, 2.0)}),
    "geodesics": ({"gamma": 1}, {"system": "grushin", "x0": (0.3, 0.2), "xi0": (1.0, 2.0),
                                 "S": 5.0}),
    "transmute": ({"gamma": 1, "grid_n": 513, "fourier_max": 40, "branch_max": 4,
                   "lambda_cutoff": 500.0},
                  {"lambdas": (1e2, 1e3, 1e4, 1e5)}),
    "lowfreq_cost": (_LOW, {"T": 1.0, "lambda_grid": tuple(np.arange(40.0, 301.0, 20.0))}),
    "parabolic": (_LOW, {"T_list": (0.1, 0.2, 0.4, 0.8, 1.6), "eta": 0.02, "random_count": 200}),
    "gevrey": (_LOW, {"T": 1.0, "theta_list": (0.8, 1.0, 1.5, 2.0), "random_count": 200}),
    "frequency_cost": (_LOW, {"T": 1.0, "random_count": 400, "bin_width": 10.0}),
    "subelliptic": ({"family": "grushin_torus", "gamma": 1, "grid_n": 129, "fourier_max": 1},
                    {"bands": (4, 8, 16, 32, 64, 128), "trials": 200, "nx1": 512, "nx2": 512}),
    "accept_all": ({}, {}),
}

_REGION_DEFAULT = {"x1_range": (0.3, 0.9)}

# key -> parser; parsers raise ValueError with a readable reason
_INT = int
_FLOAT = float


def _floats(text):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _ints(text):
    text = text.strip()
    m = re.fullmatch(r"(-?\d+)\s*:\s*(-?\d+)(?:\s*:\s*(\d+))?", text)
    if m:
        a, b, step = int(m[1]), int(m[2]), int(m[3] or 1)
        return tuple(range(a, b, step))
    return tuple(int(p) for p in re.split(r"[,\s]+", text) if p)


def _pair(text):
    v = _floats(text)
    if len(v) != 2:
        raise ValueError("expected two numbers 'lo, hi'")
    return v


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _name(text):
    return text.strip().lower().replace("-", "_")


SCHEMA = {
    "operator": {"family": str.strip, "gamma": _INT, "grid_n": _INT, "fourier_max": _INT,
                 "branch_max": _INT, "lambda_cutoff": _opt_float, "fourier_indices": _ints,
                 "threads": _INT},
    "region": {"x1_range": _pair, "x2_range": _pair, "t_range": _pair},
    "transmute": {"T": _FLOAT, "S": _FLOAT, "alpha": _opt_float},
    "experiment": {"name": _name, "output_dir": str.strip, "seed": _INT,
                   "T": _FLOAT, "lambda_grid": _floats, "T_list": _floats, "eta": _FLOAT,
                   "theta_list": _floats, "random_count": _INT, "bin_width": _FLOAT,
                   "powers": _floats, "lambdas": _floats, "system": _name, "x0": _floats,
                   "xi0": _floats, "S": _FLOAT, "bands": _ints, "trials": _INT, "nx1": _INT,
                   "nx2": _INT},
    "tolerances": {k: _FLOAT for k in DEFAULT_TOLERANCES},
}


class ConfigError(HypolabError):
    """Bad config; ``line`` is 1-based (0 when no line applies)."""

    def __init__(self, msg, line=0, field=None, source="<config>"):
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {msg}")
        self.line = line
        self.field = field


@dataclass
class ExperimentConfig:
    operator: OperatorSpec
    region: ObservationRegion
    transmute: TransmuteParams
    experiment: str
    output_dir: Path = Path(".")
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    params: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def echo(self) -> dict:
        """Flat view of every setting, for JSON summaries."""
        out = {"experiment": self.experiment, "seed": self.seed}
        for k, v in vars(self.operator).items():
            if k != "threads":  # results do not depend on it
                out[f"operator.{k}"] = _flat(v)
        for k, v in vars(self.region).items():
            out[f"region.{k}"] = _flat(v)
        for k, v in vars(self.transmute).items():
            out[f"transmute.{k}"] = _flat(v)
        for k, v in self.params.items():
            out[f"param.{k}"] = _flat(v)
        for k, v in self.tolerances.items():
            out[f"tolerance.{k}"] = v
        return out


def _flat(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        if len(v) > 8 and all(isinstance(x, (int, np.integer)) for x in v) \
                and np.all(np.diff(v) == 1):
            return f"{v[0]}:{v[-1] + 1}"
        return ", ".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _line_index(text):
    """``(section, key) -> line`` and ``section -> header line``."""
    keys, heads = {}, {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m[1].strip()
            heads.setdefault(section, no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            keys.setdefault((section, m[1].strip()), no)
    return keys, heads


def parse_config(text: str, experiment: str | None = None, source: str = "<config>",
                 overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a config; ``experiment`` (e.g. from the command line) wins."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep T and S distinct from t and s
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno, None, source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{exc.option}: duplicate key in [{exc.section}]", exc.lineno or 0,
                          exc.option, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno or 0, None, source) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line!r}", lineno, None, source) from None
    keys, heads = _line_index(text)

    def fail(msg, sec, key=None):
        line = keys.get((sec, key), heads.get(sec, 0)) if key else heads.get(sec, 0)
        raise ConfigError(f"{key}: {msg}" if key else msg, line, key, source)

    raw = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            fail(f"unknown section [{sec}]", sec)
        raw[sec] = {}
        for key, value in cp.items(sec):
            conv = SCHEMA[sec].get(key)
            if conv is None:
                fail(f"unknown key in [{sec}]", sec, key)
            try:
                raw[sec][key] = conv(value)
            except ValueError as exc:
                fail(f"bad value {value!r} ({exc})", sec, key)

    exp_sec = raw.get("experiment", {})
    if "name" in exp_sec and exp_sec["name"] not in EXPERIMENTS:
        fail(f"unknown experiment {exp_sec['name']!r}", "experiment", "name")
    name = experiment or exp_sec.get("name") or "spectrum"
    name = _name(name)
    if name not in EXPERIMENTS:
        fail(f"unknown experiment {name!r}", "experiment", "name")
    op_default, param_default = EXPERIMENT_DEFAULTS[name]
    overrides = overrides or {}

    op_kw = dict(op_default)
    op_given = raw.get("operator", {})
    if "fourier_max" in op_given and "fourier_indices" not in op_given:
        op_kw.pop("fourier_indices", None)
    op_kw.update(op_given)
    if overrides.get("threads") is not None:
        op_kw["threads"] = overrides["threads"]
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(raw.get("tolerances", {}))
    for k, v in tol.items():
        if not v > 0:
            fail("must be positive", "tolerances", k)
    op_kw["eigen_residual"] = tol["eigen_residual"]

    def build(cls, kw, sec):
        try:
            return cls(**kw)
        except ValueError as exc:
            msg = str(exc)
            fld = msg.split(":", 1)[0].strip()
            given = raw.get(sec, {})
            if fld in given:
                fail(msg.split(":", 1)[1].strip(), sec, fld)
            if fld == "eigen_residual":
                fail(msg.split(":", 1)[1].strip(), "tolerances", fld)
            raise ConfigError(msg, heads.get(sec, 0), fld, source) from None
        except TypeError as exc:
            raise ConfigError(str(exc), heads.get(sec, 0), None, source) from None

    op = build(OperatorSpec, op_kw, "operator")
    region = build(ObservationRegion, {**_REGION_DEFAULT, **raw.get("region", {})}, "region")
    tp = build(TransmuteParams, raw.get("transmute", {}), "transmute")

    params = dict(param_default)
    params.update({k: v for k, v in exp_sec.items() if k not in ("name", "output_dir", "seed")})
    _check_params(params, fail)

    seed = exp_sec.get("seed", 0)
    if overrides.get("seed") is not None:
        seed = overrides["seed"]
    out = overrides.get("out") or exp_sec.get("output_dir") or "."
    return ExperimentConfig(op, region, tp, name, Path(out), int(seed), tol, params, source)


def _check_params(params, fail):
    positive = ("T", "eta", "bin_width", "S")
    for k in positive:
        if k in params and not params[k] > 0:
            fail("must be positive", "experiment", k)
    for k in ("random_count", "trials"):
        if k in params and params[k] < 0:
            fail("must be >= 0", "experiment", k)
    for k in ("lambda_grid", "T_list", "theta_list", "lambdas"):
        if k in params and np.any(np.diff(params[k]) <= 0):
            fail("must be strictly ascending", "experiment", k)
    if "bands" in params and (len(params["bands"]) < 2 or np.any(np.diff(params["bands"]) <= 0)
                              or params["bands"][0] < 1):
        fail("need >= 2 ascending positive band edges", "experiment", "bands")
    if "system" in params and params["system"] not in ("grushin", "heisenberg", "elliptic"):
        fail(f"unknown system {params['system']!r}", "experiment", "system")


def load_config(path, experiment: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", 0, None, str(path)) from None
    return parse_config(text, experiment, str(path), overrides)


def default_config(experiment: str, overrides: dict | None = None) -> ExperimentConfig:
    return parse_config("", experiment, "<defaults>", overrides)
