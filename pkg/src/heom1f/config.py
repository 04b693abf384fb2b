"""Experiment configuration: YAML files checked against a JSON schema.

Frequencies are written as ordinary frequencies with a unit suffix
(``"10 kHz"``, ``"0.5148 GHz"``) and converted to rad/ns here.  Times
carry an ``_ns`` suffix in the key name.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from . import units
from .bath import BathModel, QuadConfig

EXPERIMENTS = ("free_dephasing", "cpmg", "udd", "cr_fidelity", "cr_tomography",
               "decompose", "calibrate_cr", "tnl_compare")
NOISE_MODES = ("full_1f", "cutoff_plus_static", "total_static", "lindblad", "none")

_FREQ = {"type": "string", "pattern": r"^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*(Hz|kHz|MHz|GHz)\s*$"}
_TEMP = {"type": "string", "pattern": r"^\s*(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*(mK|K)\s*$"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_AXES = {"type": "string", "pattern": r"^(X|Y|-X|-Y|[XY]+)$"}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "experiment": {"enum": list(EXPERIMENTS)},
    "description": {"type": "string"},
    "bath": _obj({
        "noise": {"enum": list(NOISE_MODES)},
        "eta": _NONNEG,
        "eta_convention": {"enum": ["ordinary", "text", "table"]},
        "s": {"type": "number", "exclusiveMinimum": -1},
        "qubit_frequency": _FREQ,
        "high_cutoff": _FREQ,
        "low_cutoff": _FREQ,
        "transition_width": _FREQ,
        "temperature": _TEMP,
        "window": {"enum": ["odd", "literal"]},
        "static_variance": _NONNEG,
        "t_phi_ns": _POS,
        "fit": _obj({"horizon_ns": _POS, "tolerance": _POS,
                     "k_max": {"type": "integer", "minimum": 2}}),
        "quadrature": _obj({"window_factor": _POS, "rel_tol": _POS,
                            "limit": {"type": "integer", "minimum": 10}}),
    }),
    "system": _obj({
        "initial_state": {"enum": ["plus", "zero", "one"]},
        "cr": _obj({
            "detuning": _FREQ,
            "coupling": _FREQ,
            "amplitude": _FREQ,
            "duration_ns": _POS,
            "amplitude_from_area": {"type": "boolean"},
            "calibrate": {"type": "boolean"},
            "theta_over_pi": {"type": "number"},
            "rz_over_pi": _obj({k: {"type": "number"} for k in ("pre_1", "post_1", "pre_2", "post_2")}),
        }),
    }),
    "schedule": _obj({
        "pulses": {"type": "integer", "minimum": 0},
        "sequences": {"type": "array", "items": _AXES, "minItems": 1},
        "tau_ns": _POS,
        "gap_ns": _NONNEG,
        "first_ns": _NONNEG,
        "total_ns": _POS,
        "ideal_reference": {"type": "boolean"},
        "fit_subset": {"enum": ["all", "odd", "even"]},
    }),
    "solver": _obj({
        "depth": {"type": "integer", "minimum": 0},
        "dt_ns": _POS,
        "stepper": {"enum": ["ifrk4", "rk4"]},
        "scheme": {"enum": ["auto", "pairs", "merged"]},
        "max_ados": {"type": "integer", "minimum": 1},
        "static_depth": {"type": "integer", "minimum": 1},
        "static_check": {"type": "boolean"},
        "tnl_depths": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "reference_depth": {"type": "integer", "minimum": 0},
    }),
    "calibration": _obj({
        "target": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_iter": {"type": "integer", "minimum": 1},
        "trivial": {"type": "boolean"},
    }),
    "output": _obj({
        "t_end_ns": _POS,
        "sample_ns": _POS,
        "top_k": {"type": "integer", "minimum": 1},
    }),
}, required=("experiment",))

DEFAULTS = {
    "bath": {"noise": "full_1f", "eta": units.ETA_NOMINAL, "eta_convention": "ordinary", "s": 0.0,
             "qubit_frequency": "5 GHz", "high_cutoff": "10 GHz", "low_cutoff": "10 kHz",
             "temperature": "50 mK", "window": "odd",
             "fit": {"tolerance": 1e-3, "k_max": 40}},
    "system": {"initial_state": "plus"},
    "schedule": {"pulses": 10, "sequences": ["X", "Y"], "tau_ns": units.CPMG_TAU,
                 "gap_ns": units.CPMG_GAP, "ideal_reference": True, "fit_subset": "all"},
    "solver": {"depth": 3, "dt_ns": 0.05, "stepper": "ifrk4", "scheme": "auto",
               "max_ados": 250_000, "static_depth": 40, "static_check": True,
               "tnl_depths": [1, 2, 3], "reference_depth": 5},
    "calibration": {"target": 0.999, "max_iter": 60, "trivial": False},
    "output": {"t_end_ns": 500.0, "sample_ns": 1.0, "top_k": 8},
}


class ConfigError(ValueError):
    """Configuration failed validation; ``errors`` lists ``path: message`` strings."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_temperature(text):
    m = re.match(r"^\s*([\d.eE+-]+)\s*(mK|K)\s*$", text)
    if m is None:
        raise ValueError(f"cannot parse temperature {text!r}")
    value = float(m.group(1))
    return value * 1e-3 if m.group(2) == "mK" else value


@dataclass
class ExperimentConfig:
    """A validated configuration (raw mapping with defaults applied)."""

    experiment: str
    data: dict
    source_text: str = ""
    advisories: list = field(default_factory=list)

    @property
    def bath(self):
        return self.data["bath"]

    @property
    def system(self):
        return self.data["system"]

    @property
    def schedule(self):
        return self.data["schedule"]

    @property
    def solver(self):
        return self.data["solver"]

    @property
    def calibration(self):
        return self.data["calibration"]

    @property
    def output(self):
        return self.data["output"]

    def digest(self):
        """SHA-256 of the canonical JSON form of the effective configuration."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def bath_model(self):
        b = self.bath
        kw = {}
        if "transition_width" in b:
            kw["phi_width"] = units.parse_frequency(b["transition_width"])
        return BathModel(
            eta=units.eta_from_convention(b["eta"], b["eta_convention"]),
            s=float(b["s"]),
            omega_q=units.parse_frequency(b["qubit_frequency"]),
            omega_hc=units.parse_frequency(b["high_cutoff"]),
            omega_lc=units.parse_frequency(b["low_cutoff"]),
            beta=units.beta_from_temperature(parse_temperature(b["temperature"])),
            window=b["window"], **kw)

    def quad_config(self):
        q = self.bath.get("quadrature", {})
        return QuadConfig(**{k: q[k] for k in ("window_factor", "rel_tol", "limit") if k in q})


def _schema_errors(raw):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errs = []
    for e in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        errs.append(f"{path}: {e.message}")
    return errs


def _semantic_errors(cfg):
    errs = []
    b = cfg.bath
    try:
        hc = units.parse_frequency(b["high_cutoff"])
        lc = units.parse_frequency(b["low_cutoff"])
        if not hc > lc > 0:
            errs.append("bath.low_cutoff: must be positive and below bath.high_cutoff")
    except ValueError as exc:
        errs.append(f"bath: {exc}")
    try:
        if parse_temperature(b["temperature"]) <= 0:
            errs.append("bath.temperature: must be positive")
    except ValueError as exc:
        errs.append(f"bath.temperature: {exc}")
    if b["noise"] == "cutoff_plus_static" and "static_variance" not in b:
        errs.append("bath.static_variance: required for noise 'cutoff_plus_static'")
    if b["noise"] == "lindblad" and "t_phi_ns" not in b:
        errs.append("bath.t_phi_ns: required for noise 'lindblad'")
    if cfg.experiment in ("cr_fidelity", "cr_tomography", "calibrate_cr") and "cr" not in cfg.system:
        errs.append("system.cr: required for cross-resonance experiments")
    if cfg.experiment == "udd" and "total_ns" not in cfg.schedule:
        errs.append("schedule.total_ns: required for udd")
    if cfg.experiment in ("cpmg", "udd") and b["noise"] == "lindblad":
        errs.append("bath.noise: lindblad is only available for cr_fidelity")
    return errs


def advisories(cfg):
    """Physics advisories that do not block a run."""
    out = []
    try:
        model = cfg.bath_model()
    except ValueError:
        return out
    dt = cfg.solver["dt_ns"]
    gmax = model.omega_hc
    stiff = dt * gmax
    if cfg.solver["stepper"] == "rk4" and stiff > 2.5:
        out.append(f"solver.dt_ns: dt * Re(gamma_max) = {stiff:.3g} > 2.5, outside the RK4 stability region")
    elif cfg.solver["stepper"] == "ifrk4" and dt > 0.5:
        out.append(f"solver.dt_ns: dt = {dt:g} ns with dt * Re(gamma_max) = {stiff:.3g} > 2.5; "
                   "damping is integrated exactly but drive and bath couplings are under-resolved")
    if "cr" in cfg.system:
        from .crgate import dispersive_advisories
        try:
            out += [f"system.cr: {m}" for m in dispersive_advisories(cr_params(cfg))]
        except ValueError:
            pass
    return out


def cr_params(cfg):
    from .crgate import CrParams, solve_amplitude
    c = cfg.system["cr"]
    rz = c.get("rz_over_pi", {})
    p = CrParams(
        detuning=units.parse_frequency(c.get("detuning", f"{units.CR_DETUNING_GHZ} GHz")),
        coupling=units.parse_frequency(c.get("coupling", f"{units.CR_COUPLING_GHZ} GHz")),
        duration=float(c.get("duration_ns", units.CR_DURATION)),
        amplitude=units.parse_frequency(c.get("amplitude", f"{units.CR_AMPLITUDE_GHZ} GHz")),
        rz_pre_1=math.pi * rz.get("pre_1", 0.0), rz_post_1=math.pi * rz.get("post_1", 0.0),
        rz_pre_2=math.pi * rz.get("pre_2", 0.0), rz_post_2=math.pi * rz.get("post_2", 0.0))
    if c.get("amplitude_from_area", False):
        theta = math.pi * c.get("theta_over_pi", 0.5)
        from dataclasses import replace
        p = replace(p, amplitude=solve_amplitude(p, theta))
    return p


def build(raw, source_text=""):
    """Validate a raw mapping and apply defaults.

    Raises
    ------
    ConfigError
        With ``path: message`` entries for every problem found.
    """
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: configuration must be a mapping"])
    errs = _schema_errors(raw)
    if errs:
        raise ConfigError(errs)
    data = _merge(DEFAULTS, {k: v for k, v in raw.items() if k not in ("experiment", "description")})
    cfg = ExperimentConfig(raw["experiment"], data, source_text)
    errs = _semantic_errors(cfg)
    if errs:
        raise ConfigError(errs)
    cfg.advisories = advisories(cfg)
    return cfg


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: {exc}"]) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<yaml>: {exc}"]) from None
    return build(raw, text)


def validate(raw):
    """Report-only validation: ``{"errors": [...], "advisories": [...]}``."""
    try:
        cfg = build(raw)
    except ConfigError as exc:
        return {"errors": exc.errors, "advisories": []}
    return {"errors": [], "advisories": cfg.advisories}
