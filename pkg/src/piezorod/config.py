"""Scenario configuration: YAML parsing, validation and presets.

A scenario file is YAML with four sections (material, density,
discretization, initial) plus a seed.  Every field has a default; an optional
top-level ``preset`` key selects a named base scenario that the remaining keys
override.  Validation collects *all* violations, each tagged with the dotted
path of the offending field, instead of stopping at the first.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .density import (CanonicalDensity, UniformTestDensity,
                      load_tabulated_density)
from .errors import ConfigError
from .materials import CV_MODELS, MaterialParams

DENSITY_KINDS = ("canonical", "uniform-test", "tabulated")
R_RULES = ("gauss", "midpoint")
IC_PRESETS_U = ("zero",)
IC_PRESETS_THETA = ("reference", "warm-bump")


@dataclass
class DensityConfig:
    kind: str = "canonical"
    a0: float = 0.1
    r_decay: float = 1.0
    phi0: float = 64.0
    h0: float = 0.5
    amplitude: float = 1.0
    r_hi: float = 1.0
    v_hi: float = 1.0
    path: str = ""
    r_nodes: int = 64
    r_rule: str = "gauss"
    tail_tol: float = 1e-8


@dataclass
class DiscretizationConfig:
    m: int = 8
    nodes: int = 0            # 0 selects 8m+1
    dt: float = 0.002
    t_final: float = 2.0
    output_stride: int = 10
    tol_q: float = 1e-10
    regularized_theta: bool = False


@dataclass
class InitialConfig:
    u0: dict = field(default_factory=lambda: {"preset": "zero"})
    u1: dict = field(default_factory=lambda: {"preset": "zero"})
    theta0: dict = field(default_factory=lambda: {"preset": "reference"})

    def resolve(self, material):
        """Turn the three specs into coefficient arrays for the projector."""
        ell = material.ell

        def resolve_u(spec):
            if "coeffs" in spec:
                return np.asarray(spec["coeffs"], dtype=float)
            return None  # zero

        def resolve_theta(spec):
            if "coeffs" in spec:
                return np.asarray(spec["coeffs"], dtype=float)
            name = spec.get("preset", "reference")
            if name == "reference":
                return np.array([material.theta_c * np.sqrt(ell)])
            # warm-bump: theta_c + amplitude * cos(pi x / ell)
            amp = float(spec.get("amplitude", 0.1 * material.theta_c))
            return np.array([material.theta_c * np.sqrt(ell),
                             amp * np.sqrt(ell / 2.0)])

        return resolve_u(self.u0), resolve_u(self.u1), resolve_theta(self.theta0)


@dataclass
class ScenarioConfig:
    material: MaterialParams
    density: DensityConfig
    discretization: DiscretizationConfig
    initial: InitialConfig
    seed: int = 12345
    allow_hypothesis_fail: bool = False
    raw: dict = field(default_factory=dict)


DEFAULTS = {
    "seed": 12345,
    "allow_hypothesis_fail": False,
    "material": {
        "rho": 1.0, "nu": 0.05, "c": 1.0, "e": 0.5, "kappa": 1.0,
        "gamma": 0.02, "beta": 0.1, "theta_c": 1.0, "mu_heat": 0.1,
        "c0": 1.0, "R": 50.0, "ell": 1.0,
        "f0": 0.5, "f1": 1.0, "alpha0": 0.5, "cv_model": "growth",
    },
    "density": {
        "kind": "canonical", "a0": 0.1, "r_decay": 1.0, "phi0": 64.0,
        "h0": 0.5, "amplitude": 1.0, "r_hi": 1.0, "v_hi": 1.0, "path": "",
        "r_nodes": 64, "r_rule": "gauss", "tail_tol": 1e-8,
    },
    "discretization": {
        "m": 8, "nodes": 0, "dt": 0.002, "t_final": 2.0, "output_stride": 10,
        "tol_q": 1e-10, "regularized_theta": False,
    },
    "initial": {
        "u0": {"coeffs": [0.1, 0.03]},
        "u1": {"preset": "zero"},
        "theta0": {"preset": "reference"},
    },
}

PRESETS = {
    # shipped default: full hysteretic thermo-mechanics, admissibility-passing
    "full-default": {},
    # pure elastic oscillator: no viscosity, no thermal expansion, no hysteresis
    "elastic-only": {
        "material": {"nu": 0.0, "beta": 0.0},
        "density": {"a0": 0.0},
        "discretization": {"m": 8, "dt": 0.005, "t_final": 16.63,
                           "output_stride": 20},
        "initial": {"u0": {"coeffs": [0.1]}, "u1": {"preset": "zero"},
                    "theta0": {"preset": "reference"}},
    },
    # smooth scenario for mode-refinement studies
    "smooth-convergence": {
        "material": {"beta": 0.2, "nu": 0.05},
        "discretization": {"m": 8, "dt": 0.001, "t_final": 0.5,
                           "output_stride": 50},
        "initial": {"u0": {"coeffs": [0.2, 0.05]}, "u1": {"preset": "zero"},
                    "theta0": {"preset": "warm-bump", "amplitude": 0.2}},
    },
    # deliberately violates the heat-capacity growth condition
    "constant-cv": {
        "material": {"cv_model": "constant"},
    },
    # lean long-horizon soak run for step-count-heavy property checks
    "soak": {
        "density": {"r_nodes": 12},
        "discretization": {"m": 4, "nodes": 17, "dt": 1e-4, "t_final": 10.0,
                           "output_stride": 1000},
        "initial": {"u0": {"coeffs": [0.25, 0.08]},
                    "u1": {"coeffs": [0.0, 0.25]},
                    "theta0": {"preset": "reference"}},
    },
}

DEFAULTS_YAML = """\
# piezorod scenario configuration (all values shown are the defaults)
preset: full-default     # base scenario: full-default | elastic-only |
                         #   smooth-convergence | constant-cv | soak
seed: 12345              # RNG seed recorded in outputs (statistical tools only)
allow_hypothesis_fail: false  # run even if the admissibility check fails

material:
  rho: 1.0               # mass density (> 0)
  nu: 0.05               # viscosity (>= 0)
  c: 1.0                 # elastic modulus (>= 0)
  e: 0.5                 # piezoelectric coupling
  kappa: 1.0             # permittivity (> 0)
  gamma: 0.02            # couple-stress modulus (> 0)
  beta: 0.1              # thermal expansion (>= 0)
  theta_c: 1.0           # reference temperature (> 0)
  mu_heat: 0.1           # heat conductivity (> 0)
  c0: 1.0                # heat-capacity floor (> 0)
  R: 50.0                # cut-off level for temperature / viscous heating (> 0)
  ell: 1.0               # rod length (> 0)
  f0: 0.5                # lower bound of the self-similarity weight (> 0)
  f1: 1.0                # upper bound of the self-similarity weight (>= f0)
  alpha0: 0.5            # feedback gain amplitude; needs 1 + kappa*alpha >= 0
  cv_model: growth       # heat capacity law: growth | constant

density:
  kind: canonical        # canonical | uniform-test | tabulated
  a0: 0.1                # canonical: threshold-weight amplitude (>= 0)
  r_decay: 1.0           # canonical: exponential threshold decay scale (> 0)
  phi0: 64.0             # canonical: bump amplitude (>= 0)
  h0: 0.5                # canonical: thermal shift amplitude (bounded, >= 0)
  amplitude: 1.0         # uniform-test: flat density value (>= 0)
  r_hi: 1.0              # uniform-test: threshold support (> 0)
  v_hi: 1.0              # uniform-test: deflection support (> 0)
  path: ""               # tabulated: CSV file with header theta,r,v,psi
  r_nodes: 64            # quadrature nodes over the threshold axis (>= 1)
  r_rule: gauss          # threshold quadrature: gauss | midpoint
  tail_tol: 1.0e-8       # truncated tail mass tolerance (> 0)

discretization:
  m: 8                   # Galerkin mode count (>= 1)
  nodes: 0               # spatial quadrature nodes; 0 selects 8m+1 (>= 4m+1)
  dt: 0.002              # time step (> 0)
  t_final: 2.0           # final time (> 0)
  output_stride: 10      # steps between trace/snapshot records (>= 1)
  tol_q: 1.0e-10         # feedback inversion residual tolerance (> 0)
  regularized_theta: false  # enable the 1/m temperature-inertia term

initial:
  u0: {coeffs: [0.1, 0.03]}   # displacement: {coeffs: [...]} or {preset: zero}
  u1: {preset: zero}          # velocity: same forms as u0
  theta0: {preset: reference} # temperature: reference | warm-bump (+amplitude)
                              #   or {coeffs: [...]} in the cosine basis
"""


def _deep_merge(base, override, depth=1):
    """Merge section dicts by key; below the section level values replace
    wholesale (an initial-condition spec like {preset: zero} is one value)."""
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if depth > 0 and isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val, depth - 1)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _check_number(errs, section, key, value, *, gt=None, ge=None, kind=float):
    path = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errs.append(f"{path}: expected a number, got {value!r}")
        return None
    value = kind(value)
    if gt is not None and not value > gt:
        errs.append(f"{path}: must be > {gt} (got {value})")
    if ge is not None and not value >= ge:
        errs.append(f"{path}: must be >= {ge} (got {value})")
    return value


def validate_config(data):
    """Validate a raw dict; returns (ScenarioConfig or None, violations)."""
    errs = []
    data = dict(data or {})

    preset = data.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            errs.append(f"preset: unknown preset '{preset}' "
                        f"(choose from {sorted(PRESETS)})")
            return None, errs
        data = _deep_merge(_deep_merge(DEFAULTS, PRESETS[preset]), data)
    else:
        data = _deep_merge(DEFAULTS, data)

    for section in ("material", "density", "discretization", "initial"):
        if not isinstance(data.get(section), dict):
            errs.append(f"{section}: must be a mapping")
            return None, errs

    for section, known in (("material", DEFAULTS["material"]),
                           ("density", DEFAULTS["density"]),
                           ("discretization", DEFAULTS["discretization"]),
                           ("initial", DEFAULTS["initial"])):
        for key in data[section]:
            if key not in known:
                errs.append(f"{section}.{key}: unknown field")
    for key in data:
        if key not in DEFAULTS:
            errs.append(f"{key}: unknown field")

    mat_d = data["material"]
    for key in ("rho", "kappa", "gamma", "mu_heat", "c0", "ell", "R",
                "theta_c", "f0"):
        _check_number(errs, "material", key, mat_d.get(key), gt=0.0)
    for key in ("nu", "beta", "c"):
        _check_number(errs, "material", key, mat_d.get(key), ge=0.0)
    for key in ("e", "f1", "alpha0"):
        _check_number(errs, "material", key, mat_d.get(key))
    if mat_d.get("cv_model") not in CV_MODELS:
        errs.append(f"material.cv_model: must be one of {CV_MODELS}")

    material = None
    if not errs:
        material = MaterialParams(**{k: mat_d[k] for k in DEFAULTS["material"]})
        errs.extend(material.validate())

    den_d = data["density"]
    if den_d.get("kind") not in DENSITY_KINDS:
        errs.append(f"density.kind: must be one of {DENSITY_KINDS}")
    _check_number(errs, "density", "a0", den_d.get("a0"), ge=0.0)
    _check_number(errs, "density", "r_decay", den_d.get("r_decay"), gt=0.0)
    _check_number(errs, "density", "phi0", den_d.get("phi0"), ge=0.0)
    _check_number(errs, "density", "h0", den_d.get("h0"), ge=0.0)
    _check_number(errs, "density", "amplitude", den_d.get("amplitude"), ge=0.0)
    _check_number(errs, "density", "r_hi", den_d.get("r_hi"), gt=0.0)
    _check_number(errs, "density", "v_hi", den_d.get("v_hi"), gt=0.0)
    _check_number(errs, "density", "r_nodes", den_d.get("r_nodes"), ge=1,
                  kind=int)
    _check_number(errs, "density", "tail_tol", den_d.get("tail_tol"), gt=0.0)
    if den_d.get("r_rule") not in R_RULES:
        errs.append(f"density.r_rule: must be one of {R_RULES}")
    if den_d.get("kind") == "tabulated" and not den_d.get("path"):
        errs.append("density.path: required for tabulated densities")

    dis_d = data["discretization"]
    m = _check_number(errs, "discretization", "m", dis_d.get("m"), ge=1,
                      kind=int)
    nodes = _check_number(errs, "discretization", "nodes", dis_d.get("nodes"),
                          ge=0, kind=int)
    _check_number(errs, "discretization", "dt", dis_d.get("dt"), gt=0.0)
    _check_number(errs, "discretization", "t_final", dis_d.get("t_final"),
                  gt=0.0)
    _check_number(errs, "discretization", "output_stride",
                  dis_d.get("output_stride"), ge=1, kind=int)
    _check_number(errs, "discretization", "tol_q", dis_d.get("tol_q"), gt=0.0)
    if m and nodes and nodes < 4 * m + 1:
        errs.append(f"discretization.nodes: must be 0 or >= 4m+1 = {4 * m + 1}")

    ini_d = data["initial"]
    for name, presets in (("u0", IC_PRESETS_U), ("u1", IC_PRESETS_U),
                          ("theta0", IC_PRESETS_THETA)):
        spec = ini_d.get(name)
        if not isinstance(spec, dict):
            errs.append(f"initial.{name}: must be a mapping")
            continue
        if "coeffs" in spec and "preset" in spec:
            errs.append(f"initial.{name}: give either coeffs or preset, "
                        "not both")
        elif "coeffs" in spec:
            try:
                np.asarray(spec["coeffs"], dtype=float)
            except (TypeError, ValueError):
                errs.append(f"initial.{name}.coeffs: must be a numeric list")
        elif spec.get("preset") not in presets:
            errs.append(f"initial.{name}.preset: unknown preset "
                        f"{spec.get('preset')!r} (choose from {presets})")

    if not isinstance(data.get("seed"), int) or isinstance(data.get("seed"), bool):
        errs.append("seed: must be an integer")

    if errs:
        return None, errs

    cfg = ScenarioConfig(
        material=material,
        density=DensityConfig(**{k: den_d[k] for k in DEFAULTS["density"]}),
        discretization=DiscretizationConfig(
            **{k: dis_d[k] for k in DEFAULTS["discretization"]}),
        initial=InitialConfig(u0=ini_d["u0"], u1=ini_d["u1"],
                              theta0=ini_d["theta0"]),
        seed=data["seed"],
        allow_hypothesis_fail=bool(data.get("allow_hypothesis_fail", False)),
        raw=data,
    )
    return cfg, []


def parse_config(path):
    """Load and validate a scenario file; raises ConfigError listing every
    violation found."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError([f"config: cannot read '{path}': {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: invalid YAML in '{path}': {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a mapping"])
    cfg, errs = validate_config(data)
    if errs:
        raise ConfigError(errs)
    return cfg


def config_from_preset(name, overrides=None):
    """Build a ScenarioConfig from a named preset plus overrides."""
    data = {"preset": name}
    data.update(overrides or {})
    cfg, errs = validate_config(data)
    if errs:
        raise ConfigError(errs)
    return cfg


def build_material(config):
    return config.material


def build_density(config):
    d = config.density
    if d.kind == "canonical":
        return CanonicalDensity(a0=d.a0, r_decay=d.r_decay, phi0=d.phi0,
                                h0=d.h0)
    if d.kind == "uniform-test":
        return UniformTestDensity(amplitude=d.amplitude, r_hi=d.r_hi,
                                  v_hi=d.v_hi)
    return load_tabulated_density(d.path)


def config_hash(config):
    """Stable short hash of the resolved configuration."""
    blob = json.dumps(config.raw, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
