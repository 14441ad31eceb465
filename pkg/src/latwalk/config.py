"""Experiment configuration: JSON schema, validation, normalization.

Configs are JSON objects with a versioned ``schema`` field.  Validation
aggregates every problem it finds (field paths included) instead of stopping
at the first; a config that validates is returned in normalized form with
presets resolved into inline specs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import presets
from .fractal import GDIFS, GDIFSError, gdifs_from_json
from .markov import ChainSpec, validate_chain

SCHEMA = "latwalk-experiment/1"

KINDS = (
    "lyapunov",
    "expansion_check",
    "walk_equidistribution",
    "fractal_dioph",
    "magic_formula",
    "renewal_identity",
)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    replicas: int
    steps: int
    chain: ChainSpec | None = None
    gdifs: GDIFS | None = None
    options: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


_DEFAULT_THRESHOLDS = {
    "lyapunov": {"sum_rule_sigma": 3.0},
    "expansion_check": {},
    "walk_equidistribution": {
        "max_escape": 0.01,
        "siegel_rtol": 0.05,
        "independence_alpha": 0.001,
    },
    "fractal_dioph": {
        "digit1_tol": 0.02,
        "chisq_alpha": 0.001,
    },
    "magic_formula": {"max_residual": 1e-6},
    "renewal_identity": {"max_abs_z": 3.0, "chisq_alpha": 0.001},
}

_DEFAULT_OPTIONS = {
    "lyapunov": {"representation": "standard", "growth_vectors": []},
    "expansion_check": {
        "representation": "adjoint",
        "grades": [1],
        "n_samples": 200,
        "mc_block": 16,
        "mc_samples": 64,
    },
    "walk_equidistribution": {
        "eps": [0.05],
        "radii": [1.0, 1.5, 2.0],
        "joint": True,
        "joint_stride": 16,
        "series_stride": 100,
    },
    "fractal_dioph": {
        "points": 200,
        "digits": 200,
        "trajectory": None,
    },
    "magic_formula": {"pairs": 100, "max_prefix": 50},
    "renewal_identity": {"anchor": None, "chisq_mass": 0.999},
}


def _parse_chain(obj, errors, path="chain"):
    if not isinstance(obj, dict):
        errors.append(f"{path}: expected object")
        return None
    if "preset" in obj:
        try:
            return presets.get_chain(obj["preset"])
        except KeyError as exc:
            errors.append(f"{path}.preset: {exc}")
            return None
    try:
        chain = presets.chain_from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"{path}: {exc}")
        return None
    report = validate_chain(chain)
    if not report.ok:
        errors.append(
            f"{path}.trans: columns do not sum to one at states "
            f"{list(report.state_errors)}"
        )
    for i, g in enumerate(chain.coding):
        if not np.all(np.isfinite(g)):
            errors.append(f"{path}.coding[{i}]: non-finite entries")
        elif abs(abs(np.linalg.det(g)) - 1.0) > 1e-6:
            errors.append(f"{path}.coding[{i}]: |det| != 1")
    if abs(chain.start.sum() - 1.0) > 1e-9 or np.any(chain.start < 0):
        errors.append(f"{path}.start: not a probability vector")
    return chain


def _parse_gdifs(obj, errors, path="gdifs"):
    if not isinstance(obj, dict):
        errors.append(f"{path}: expected object")
        return None
    if "preset" in obj:
        try:
            return presets.get_gdifs(obj["preset"])
        except KeyError as exc:
            errors.append(f"{path}.preset: {exc}")
            return None
    try:
        return gdifs_from_json(obj)
    except GDIFSError as exc:
        errors.append(f"{path}: {exc}")
        return None


def normalize_config(obj: dict) -> ExperimentConfig:
    """Validate a raw config dict; raises ConfigError with every problem."""
    errors = []
    if obj.get("schema") != SCHEMA:
        errors.append(f"schema: expected {SCHEMA!r}, got {obj.get('schema')!r}")
    kind = obj.get("kind")
    if kind not in KINDS:
        errors.append(f"kind: must be one of {KINDS}")
        raise ConfigError(errors)
    if "seed" not in obj or not isinstance(obj["seed"], int):
        errors.append("seed: a 64-bit integer seed is mandatory")
    replicas = obj.get("replicas", 1)
    steps = obj.get("steps", 10_000)
    if not isinstance(replicas, int) or replicas < 1:
        errors.append("replicas: positive integer required")
    if not isinstance(steps, int) or steps < 1:
        errors.append("steps: positive integer required")

    chain = None
    gdifs = None
    needs_chain = kind in (
        "lyapunov", "expansion_check", "walk_equidistribution", "renewal_identity"
    )
    needs_gdifs = kind in ("fractal_dioph", "magic_formula")
    if needs_chain:
        if "chain" not in obj:
            errors.append("chain: required for this kind")
        else:
            chain = _parse_chain(obj["chain"], errors)
    if needs_gdifs:
        if "gdifs" not in obj:
            errors.append("gdifs: required for this kind")
        else:
            gdifs = _parse_gdifs(obj["gdifs"], errors)

    options = dict(_DEFAULT_OPTIONS[kind])
    options.update(obj.get("options", {}))
    thresholds = dict(_DEFAULT_THRESHOLDS[kind])
    thresholds.update(obj.get("thresholds", {}))

    if kind == "renewal_identity" and chain is not None:
        anchor = options.get("anchor")
        if anchor is None:
            options["anchor"] = chain.states[0]
        elif anchor not in chain.states:
            errors.append(f"options.anchor: unknown state {anchor!r}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        kind=kind,
        seed=obj["seed"],
        replicas=replicas,
        steps=steps,
        chain=chain,
        gdifs=gdifs,
        options=options,
        thresholds=thresholds,
        raw=obj,
    )


def validate_config(path: str) -> ExperimentConfig:
    """Load and normalize a config file (all errors aggregated)."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"parse error at line {exc.lineno}: {exc.msg}"])
    except OSError as exc:
        raise ConfigError([str(exc)])
    return normalize_config(obj)
