"""Scenario files: a versioned JSON schema, defaults and validation.

A minimal file names the manifold and the dimension::

    {"manifold": "cp", "n": 2, "perturbation": {"f": "mu1*mu2", "eps": 0.2}}

Everything else is filled in from defaults.  Unknown keys are rejected with
the path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .functionals import Scenario
from .geometry import (FubiniStudy, Guillemin, Perturbed, Polytope, metric_from_jet,
                       parse_polynomial, potential_jet)
from .invariants import ToricField
from .quad import GridSpec, grid_rule

SCHEMA_VERSION = 1

MANIFOLDS = ("cp", "blowup_cp2", "polytope")
REFERENCES = ("fubini_study", "guillemin")

DEFAULT_TOLERANCES = {
    "theorem1": 1e-6,
    "corollary": 1e-6,
    "pali": 1e-6,
    "kenergy": 1e-6,
    "path": 1e-6,
    "theorem2": 1e-6,
    "calibration": 1e-8,
    "futaki_zero": 1e-6,
    "futaki_nonzero": 1e-3,
    "theorem3": 1e-3,
    "theorem3_zero": 2e-6,
    "gauge": 1e-6,
    "metric_independence": 1e-4,
    "linearity": 1e-6,
    "barycentre": 1e-6,
    "prop32": 1e-4,
}

_TOP_KEYS = {"schema", "name", "manifold", "n", "polytope", "reference", "perturbation",
             "grid", "k_list", "field", "tolerances", "description", "checks"}
CHECK_GROUPS = ("calibration", "theorem1", "corollary", "kenergy", "path", "theorem2", "pali",
                "theorem3", "prop32")
_GRID_KEYS = {"L", "N", "t_nodes", "stretch"}
_PERTURBATION_KEYS = {"f", "eps"}
_FIELD_KEYS = {"v", "constant"}
_POLYTOPE_KEYS = {"normals", "offsets"}


def default_nodes(n: int) -> int:
    return 64 if n == 1 else 48


@dataclass
class ScenarioConfig:
    """A loaded scenario together with the settings that are not part of the geometry."""

    scenario: Scenario
    field: Optional[ToricField]
    tolerances: dict
    checks: tuple = CHECK_GROUPS
    source: dict = field(default_factory=dict)
    path: Optional[str] = None

    @property
    def name(self) -> str:
        return self.scenario.name

    def tolerance(self, key: str) -> float:
        return self.tolerances[key]


def _require(doc, key, where, kind):
    if key not in doc:
        raise ConfigError(f"{where}{key}: required field is missing")
    value = doc[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ConfigError(f"{where}{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where or 'document'}: expected an object")
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigError(f"{where}{extra[0]}: unknown field")


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    if not np.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _integer(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer")
    return value


def _grid(doc, n):
    doc = doc or {}
    _check_keys(doc, _GRID_KEYS, "grid.")
    return GridSpec(
        half_width=_number(doc.get("L", 20.0), "grid.L"),
        nodes_per_axis=_integer(doc.get("N", default_nodes(n)), "grid.N"),
        t_nodes=_integer(doc.get("t_nodes", 16), "grid.t_nodes"),
        stretch=_number(doc.get("stretch", 2.0), "grid.stretch"),
    )


def _polytope(doc, manifold, n):
    if manifold == "cp":
        if doc is not None:
            raise ConfigError("polytope: only allowed with manifold 'polytope'")
        return Polytope.simplex(n)
    if manifold == "blowup_cp2":
        if doc is not None:
            raise ConfigError("polytope: only allowed with manifold 'polytope'")
        if n != 2:
            raise ConfigError("n: the blow-up of CP^2 has n = 2")
        return Polytope.blowup_cp2()
    if doc is None:
        raise ConfigError("polytope: required field is missing")
    _check_keys(doc, _POLYTOPE_KEYS, "polytope.")
    normals = _require(doc, "normals", "polytope.", list)
    offsets = _require(doc, "offsets", "polytope.", list)
    for i, a in enumerate(normals):
        if not isinstance(a, list) or any(isinstance(c, bool) or not isinstance(c, int) for c in a):
            raise ConfigError(f"polytope.normals[{i}]: expected a list of integers")
    offsets = [_number(b, f"polytope.offsets[{i}]") for i, b in enumerate(offsets)]
    poly = Polytope(tuple(tuple(a) for a in normals), tuple(offsets))
    if poly.n != n:
        raise ConfigError(f"polytope.normals: dimension {poly.n} does not match n={n}")
    return poly


def _field(doc, n):
    if doc is None:
        return None
    if isinstance(doc, list):
        doc = {"v": doc}
    _check_keys(doc, _FIELD_KEYS, "field.")
    v = _require(doc, "v", "field.", list)
    if len(v) != n:
        raise ConfigError(f"field.v: expected {n} components, got {len(v)}")
    v = tuple(_number(c, f"field.v[{i}]") for i, c in enumerate(v))
    return ToricField(v, _number(doc.get("constant", 0.0), "field.constant"))


def probe_positivity(scenario: Scenario) -> None:
    """Raise NumericalFailure if omega_phi fails to be positive on a probe rule."""
    probe = GridSpec(scenario.grid.half_width, 16, 4, scenario.grid.stretch)
    x, _ = grid_rule(scenario.n, probe)
    metric_from_jet(potential_jet(scenario.target, x), x, "omega_phi")


def scenario_from_dict(doc: dict, name: Optional[str] = None, probe: bool = True) -> ScenarioConfig:
    _check_keys(doc, _TOP_KEYS, "")
    version = doc.get("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema: unsupported version {version!r}, expected {SCHEMA_VERSION}")
    manifold = _require(doc, "manifold", "", str)
    if manifold not in MANIFOLDS:
        raise ConfigError(f"manifold: expected one of {list(MANIFOLDS)}, got {manifold!r}")
    n = _integer(_require(doc, "n", "", None), "n")
    if n < 1:
        raise ConfigError("n: must be >= 1")
    poly = _polytope(doc.get("polytope"), manifold, n)
    if poly.canonical_centre() is None:
        raise ConfigError("polytope: offsets do not describe the anticanonical class")

    reference = doc.get("reference", "fubini_study" if manifold == "cp" else "guillemin")
    if reference not in REFERENCES:
        raise ConfigError(f"reference: expected one of {list(REFERENCES)}, got {reference!r}")
    if reference == "fubini_study":
        if manifold != "cp":
            raise ConfigError("reference: the Fubini-Study potential needs manifold 'cp'")
        ref = FubiniStudy(n)
    else:
        ref = Guillemin(poly)

    target = ref
    pert = doc.get("perturbation")
    if pert is not None:
        _check_keys(pert, _PERTURBATION_KEYS, "perturbation.")
        text = _require(pert, "f", "perturbation.", str)
        eps = _number(_require(pert, "eps", "perturbation.", None), "perturbation.eps")
        target = Perturbed(ref, parse_polynomial(text, n), eps, text)

    grid = _grid(doc.get("grid"), n)
    k_list = doc.get("k_list", list(range(n + 1)))
    if not isinstance(k_list, list) or not k_list:
        raise ConfigError("k_list: expected a nonempty list of integers")
    k_list = tuple(_integer(k, f"k_list[{i}]") for i, k in enumerate(k_list))
    bad = [k for k in k_list if not 0 <= k <= n]
    if bad:
        raise ConfigError(f"k_list: k={bad[0]} is outside 0..{n}")

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_doc = doc.get("tolerances", {})
    _check_keys(tol_doc, set(DEFAULT_TOLERANCES), "tolerances.")
    for key, value in tol_doc.items():
        value = _number(value, f"tolerances.{key}")
        if value <= 0:
            raise ConfigError(f"tolerances.{key}: must be positive")
        tolerances[key] = value

    description = doc.get("description", "")
    if not isinstance(description, str):
        raise ConfigError("description: expected a string")
    scenario_name = doc.get("name", name or f"{manifold}{n}")
    if not isinstance(scenario_name, str):
        raise ConfigError("name: expected a string")
    checks = doc.get("checks", list(CHECK_GROUPS))
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise ConfigError("checks: expected a list of check names")
    unknown = [c for c in checks if c not in CHECK_GROUPS]
    if unknown:
        raise ConfigError(f"checks: unknown check {unknown[0]!r}; choose from {list(CHECK_GROUPS)}")
    scenario = Scenario(scenario_name, ref, target, grid, k_list, {"text": description})
    if probe:
        probe_positivity(scenario)
    return ScenarioConfig(scenario, _field(doc.get("field"), n), tolerances,
                          tuple(c for c in CHECK_GROUPS if c in checks), doc)


def load_scenario(path, probe: bool = True) -> ScenarioConfig:
    """Read, validate and default a scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario file ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    cfg = scenario_from_dict(doc, name=p.stem, probe=probe)
    cfg.path = str(path)
    return cfg
