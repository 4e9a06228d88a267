"""Scenario files: JSON schema, validation with line numbers, and builders.

A scenario names a manifold (a builder, a metric given by expressions, or an
immersed surface), a conductivity (a registered field or a matrix of
expressions), a task and the data that task needs.  Everything numeric that
the library would otherwise take as a Python callable is given either by a
registered name or by an expression of the small grammar in :mod:`condlab.expr`.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import classifier as cl
from . import conductivity_zoo as zoo
from . import submanifold as sub
from .errors import SchemaError
from .expr import matrix_field, radial_profile
from .geometry import ChartManifold, EuclideanPole, PolarPole, euclidean, normal_chart, polar_chart, random_analytic_metric
from .model_space import RadialProfile, Theta, linear_warping, space_form_warping
from .verification import EXAMPLES

TASKS = ("classify", "capacity", "verify-example", "curvature-report")
BUILDERS = ("euclidean", "space_form", "warped", "polar", "random_analytic")
SURFACES = {
    "plane": sub.plane,
    "cylinder": sub.cylinder,
    "sphere": sub.sphere,
    "ellipsoid": sub.ellipsoid,
    "paraboloid": sub.paraboloid,
    "hyperbolic_cylinder": sub.hyperbolic_cylinder,
}

_expr = {"type": "string", "minLength": 1}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_params = {"type": "object", "additionalProperties": {"type": ["number", "string", "array"]}}
_profile = {
    "oneOf": [
        _expr,
        {"type": "object", "properties": {"space_form": {"type": "number"}}, "required": ["space_form"],
         "additionalProperties": False},
    ]
}

_criterion = {
    "type": "object",
    "properties": {
        "theorem": {"enum": list(cl.THEOREMS)},
        "w": _profile,
        "q": {"type": "number", "exclusiveMinimum": 0},
        "theta": {
            "type": "object",
            "properties": {"a": {"type": "number"}, "b": {"type": "number"}, "c": {"type": "number"}},
            "additionalProperties": False,
        },
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "side": {"enum": [cl.UPPER, cl.LOWER]},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "budget": {"type": "integer", "minimum": 1, "maximum": 1_000_000},
        "seed": {"type": "integer", "minimum": 0},
        "step": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
        "reference_verdict": {"enum": [cl.PARABOLIC, cl.HYPERBOLIC]},
    },
    "required": ["theorem"],
    "additionalProperties": False,
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "condlab scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "manifold": {
            "type": "object",
            "properties": {
                "builder": {"enum": list(BUILDERS)},
                "dim": {"type": "integer", "minimum": 1, "maximum": 12},
                "curvature": {"type": "number"},
                "warping": _profile,
                "seed": {"type": "integer", "minimum": 0},
                "metric": {"type": "array", "items": {"type": "array", "items": _expr}},
                "box": {"type": "array", "items": _pair},
                "pole": {"enum": ["origin", "polar", "none"]},
                "surface": {"enum": list(SURFACES)},
                "params": _params,
            },
            "additionalProperties": False,
        },
        "conductivity": {
            "type": "object",
            "properties": {
                "zoo": {"enum": list(zoo.REGISTRY)},
                "params": _params,
                "matrix": {"type": "array", "items": {"type": "array", "items": _expr}},
            },
            "additionalProperties": False,
        },
        "criterion": {"oneOf": [_criterion, {"type": "array", "items": _criterion, "minItems": 1}]},
        "solver": {
            "type": "object",
            "properties": {
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "ladder": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer", "minimum": 8, "maximum": 2048},
                              "minItems": 2, "maxItems": 2},
                    "minItems": 1,
                },
            },
            "required": ["rho", "R"],
            "additionalProperties": False,
        },
        "sampling": {
            "type": "object",
            "properties": {
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "budget": {"type": "integer", "minimum": 1, "maximum": 100_000},
                "seed": {"type": "integer", "minimum": 0},
                "step": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
            },
            "additionalProperties": False,
        },
        "example": {"enum": sorted(EXAMPLES)},
        "outputs": {
            "type": "object",
            "properties": {"report": {"type": "string"}, "csv": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["task"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"task": {"const": "classify"}}},
         "then": {"required": ["criterion"], "anyOf": [{"required": ["manifold"]}, {"required": ["conductivity"]}]}},
        {"if": {"properties": {"task": {"const": "capacity"}}}, "then": {"required": ["solver"]}},
        {"if": {"properties": {"task": {"const": "verify-example"}}}, "then": {"required": ["example"]}},
        {"if": {"properties": {"task": {"const": "curvature-report"}}}, "then": {"required": ["manifold"]}},
    ],
}


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _line_of(text: str, path) -> Optional[int]:
    """Line of the deepest object key on ``path`` (array indices are skipped)."""
    pos, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def validate(data: Any, text: Optional[str] = None) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        path = list(err.absolute_path)
        field = "/".join(str(p) for p in path) or "<root>"
        line = _line_of(text, path) if text is not None and path else None
        where = f"line {line}, " if line else ""
        raise SchemaError(f"{where}field {field}: {err.message}")
    return data


def loads(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate(data, text)


def load(path) -> dict:
    return loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_profile(spec) -> RadialProfile:
    """``"r"``, ``"sinh"``, ``"sin"``, ``{"space_form": b}`` or an expression in ``t``."""
    if isinstance(spec, dict):
        return space_form_warping(float(spec["space_form"]))
    presets = {"r": linear_warping, "linear": linear_warping,
               "sinh": lambda: space_form_warping(-1.0), "sin": lambda: space_form_warping(1.0)}
    if spec in presets:
        return presets[spec]()
    return radial_profile(spec)


@dataclass
class Setting:
    """What a scenario resolves to."""

    manifold: Optional[ChartManifold]
    surface: Optional[sub.ImmersedSubmanifold]
    conductivity: Any
    named: Optional[zoo.NamedConductivity]


def _float_params(params: dict) -> dict:
    out = {}
    for k, v in (params or {}).items():
        out[k] = tuple(float(x) for x in v) if isinstance(v, list) else v
    return out


def build_manifold(spec: dict):
    if "surface" in spec:
        try:
            return None, SURFACES[spec["surface"]](**_float_params(spec.get("params", {})))
        except TypeError as exc:
            raise SchemaError(f"field manifold/params: {exc}") from exc
    if "metric" in spec:
        n = len(spec["metric"])
        pole = spec.get("pole", "none")
        box = tuple(tuple(float(v) for v in b) for b in spec.get("box", ()))
        if box and len(box) != n:
            raise SchemaError(f"field manifold/box: need {n} intervals")
        radius = (lambda x: np.asarray(x)[..., 0]) if pole == "polar" else None
        metric = matrix_field(spec["metric"], n, radius)
        if pole == "origin":
            pole_obj = EuclideanPole(tuple([0.0] * n))
        elif pole == "polar":
            if not box:
                raise SchemaError("field manifold/box: a polar chart needs angle bounds in box")
            pole_obj = PolarPole(box[1:])
        else:
            pole_obj = None
        return ChartManifold(n, metric, box, pole_obj, "metric expressions"), None
    builder = spec.get("builder")
    if builder is None:
        raise SchemaError("field manifold: give one of builder, metric or surface")
    n = spec.get("dim", 2)
    if builder == "euclidean":
        return euclidean(n), None
    if builder == "space_form":
        return normal_chart(n, space_form_warping(float(spec.get("curvature", 0.0)))), None
    if builder == "warped":
        return normal_chart(n, build_profile(spec.get("warping", "r"))), None
    if builder == "polar":
        return polar_chart(n, build_profile(spec.get("warping", "r"))), None
    return random_analytic_metric(n, spec.get("seed", 0)), None


def build_setting(scenario: dict) -> Setting:
    manifold, surface = (None, None)
    if "manifold" in scenario:
        manifold, surface = build_manifold(scenario["manifold"])
    named = None
    W = None
    cspec = scenario.get("conductivity")
    if cspec is not None:
        if "zoo" in cspec:
            try:
                named = zoo.build(cspec["zoo"], **_float_params(cspec.get("params", {})))
            except TypeError as exc:
                raise SchemaError(f"field conductivity/params: {exc}") from exc
            W = named.field
            if manifold is None and surface is None:
                manifold = named.manifold
        elif "matrix" in cspec:
            n = surface.ambient.dim if surface is not None else (manifold.dim if manifold is not None else None)
            if n is None:
                raise SchemaError("field conductivity/matrix: needs a manifold to fix the dimension")
            chart = surface.ambient if surface is not None else manifold
            W = matrix_field(cspec["matrix"], n, chart.radius if chart.pole is not None else None)
        else:
            raise SchemaError("field conductivity: give zoo or matrix")
    elif manifold is not None or surface is not None:
        n = surface.ambient.dim if surface is not None else manifold.dim
        eye = np.eye(n)
        W = lambda x: np.broadcast_to(eye, np.asarray(x).shape[:-1] + (n, n)).copy()  # noqa: E731
    return Setting(manifold, surface, W, named)


def build_criterion(spec: dict) -> cl.CriterionSpec:
    th = spec.get("theta", {})
    kwargs = dict(
        theorem=spec["theorem"],
        q=float(spec.get("q", 2.0)),
        theta=Theta(float(th.get("a", 0.0)), float(th.get("b", 0.0)), float(th.get("c", 0.0))),
        rho=float(spec.get("rho", 1.0)),
        side=spec.get("side", cl.UPPER),
        horizon=float(spec["horizon"]) if "horizon" in spec else None,
        budget=int(spec.get("budget", 4096)),
        seed=int(spec.get("seed", 0)),
    )
    if "w" in spec:
        kwargs["w"] = build_profile(spec["w"])
    if "step" in spec:
        kwargs["step"] = float(spec["step"])
    try:
        return cl.CriterionSpec(**kwargs)
    except ValueError as exc:
        raise SchemaError(f"field criterion: {exc}") from exc


def criteria(scenario: dict) -> list:
    c = scenario["criterion"]
    return c if isinstance(c, list) else [c]


def finite(x: float):
    x = float(x)
    return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
