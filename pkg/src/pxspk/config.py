"""Experiment configuration: JSON schema, parsing, and object builders."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .errors import InvalidParameter, ParseError, SchemaError
from .grid import Grid
from .medium import MediumSpec
from .propagate import Profile, SourceSpec
from .scaling import (
    PhysicalScenario,
    RegimeKind,
    ScalingRegime,
    physical_to_dimensionless,
    regime_from_theta,
)
from .stats import EnsembleConfig, Probe, SolverKind

_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["medium", "regime", "grid", "source"],
    "properties": {
        "medium": {
            "type": "object",
            "additionalProperties": False,
            "required": ["sigma_c", "ell_z", "ell_x"],
            "properties": {
                "family": {"enum": ["gaussian"]},
                "sigma_c": {"type": "number", "minimum": 0},
                "ell_z": _POS,
                "ell_x": _POS,
                "d": {"enum": [1, 2]},
            },
        },
        "regime": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["kinetic", "diffusive", "custom"]},
                "theta": _POS,
                "epsilon": _POS,
                "eta": _POS,
                "gamma": _POS,
                "beta": {"type": "number", "minimum": 1},
                "physical": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["k0", "l0", "w0", "Z", "sigma"],
                    "properties": {"k0": _POS, "l0": _POS, "w0": _POS,
                                   "Z": _POS, "sigma": _POS},
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "length", "dz"],
            "properties": {"n": {"type": "integer", "minimum": 8},
                           "length": _POS, "dz": _POS},
        },
        "source": {
            "type": "object",
            "additionalProperties": False,
            "required": ["width"],
            "properties": {"profile": {"enum": ["gaussian"]}, "width": _POS,
                           "amplitude": _POS},
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_realizations", "seed", "checkpoints", "probes"],
            "properties": {
                "n_realizations": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "solver": {"enum": ["ito", "paraxial"]},
                "checkpoints": {"type": "array", "items": _POS, "minItems": 1},
                "probes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["r", "offsets"],
                        "properties": {
                            "r": _VEC,
                            "offsets": {"type": "array", "items": _VEC,
                                        "minItems": 1},
                        },
                    },
                },
                "batch_size": {"type": "integer", "minimum": 1},
                "shard_size": {"type": "integer", "minimum": 1},
            },
        },
        "estimators": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scintillation": {"type": "boolean"},
                "ks_exponential": {"type": "boolean"},
                "circularity": {"type": "boolean"},
                "independence_pairs": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"},
                              "minItems": 2, "maxItems": 2},
                },
                "moment_pairs": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"},
                              "minItems": 2, "maxItems": 2},
                },
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta_sweep": {"type": "array", "items": _POS, "minItems": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "formats": {"type": "array",
                            "items": {"enum": ["json", "csv"]}},
            },
        },
    },
}


def load_config(path) -> dict:
    """Read and schema-validate a JSON config; SchemaError lists the path
    of the offending key."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"config {path}: {exc.message} (at {where})") from exc
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def build_medium(cfg: dict) -> MediumSpec | None:
    """sigma_c = 0 means 'no medium' (free space); MediumSpec itself
    rejects nonpositive amplitudes."""
    m = cfg["medium"]
    if m["sigma_c"] == 0:
        return None
    try:
        return MediumSpec(sigma_c=m["sigma_c"], ell_z=m["ell_z"], ell_x=m["ell_x"],
                          d=m.get("d", 1))
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def build_regime(cfg: dict) -> ScalingRegime:
    r = cfg["regime"]
    beta = r.get("beta", 1.0)
    try:
        if "physical" in r:
            s = PhysicalScenario(**r["physical"])
            theta, epsilon, eta, _ = physical_to_dimensionless(s)
            return ScalingRegime(theta=theta, epsilon=epsilon, eta=eta, beta=beta,
                                 kind=RegimeKind.CUSTOM)
        kind = RegimeKind(r.get("kind", "kinetic"))
        if kind == RegimeKind.CUSTOM:
            missing = [k for k in ("theta", "epsilon", "eta") if k not in r]
            if missing:
                raise SchemaError(f"custom regime needs {missing}")
            return ScalingRegime(theta=r["theta"], epsilon=r["epsilon"],
                                 eta=r["eta"], beta=beta,
                                 gamma=r.get("gamma", 1.0), kind=kind)
        if "theta" not in r:
            raise SchemaError("kinetic/diffusive regime needs theta")
        return regime_from_theta(r["theta"], r.get("gamma", 1.0), kind, beta=beta)
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def build_grid(cfg: dict, d: int) -> Grid:
    g = cfg["grid"]
    try:
        return Grid(d=d, n=g["n"], length=g["length"], dz=g["dz"])
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def build_source(cfg: dict) -> SourceSpec:
    s = cfg["source"]
    try:
        return SourceSpec(profile=Profile(s.get("profile", "gaussian")),
                          width=s["width"], amplitude=s.get("amplitude", 1.0))
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def build_ensemble(cfg: dict, seed_override: int | None = None) -> EnsembleConfig:
    if "ensemble" not in cfg:
        raise SchemaError("this command needs an 'ensemble' config section")
    e = cfg["ensemble"]
    probes = tuple(Probe.make(p["r"], p["offsets"]) for p in e["probes"])
    try:
        return EnsembleConfig(
            n_realizations=e["n_realizations"],
            seed=seed_override if seed_override is not None else e["seed"],
            solver=SolverKind(e.get("solver", "ito")),
            probes=probes,
            checkpoints=tuple(e["checkpoints"]),
            batch_size=e.get("batch_size", 64),
        )
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def medium_d(cfg: dict) -> int:
    return cfg["medium"].get("d", 1)
