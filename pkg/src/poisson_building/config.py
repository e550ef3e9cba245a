"""Run configuration: a JSON document validated against a strict schema."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ParameterError
from .finite import BuildingExtents, OobInterference, WindowModel
from .grid import GridParams, db_to_linear
from .links import FreeSpaceParams
from .montecarlo import SimConfig
from .series import SeriesControl


class ConfigError(ParameterError):
    """The run configuration is malformed or violates a parameter invariant."""


def _vec(item):
    return {"oneOf": [item, {"type": "array", "items": item, "minItems": 2}]}


_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_LOSS = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}
_EXTENT = {"oneOf": [_POS, {"type": "null"}, {"const": "inf"}]}
_DB_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "num"],
            "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                           "num": {"type": "integer", "minimum": 1}},
        },
    ]
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "mu": _vec(_POS),
                "lam": _vec(_NONNEG),
                "r": _vec(_NONNEG),
                "k": _vec(_LOSS),
                "k_db": _vec({"type": "number"}),
            },
            "not": {"anyOf": [{"required": ["lam", "r"]}, {"required": ["k", "k_db"]}]},
        },
        "series": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radius": {"type": "integer", "minimum": 1},
                "tol": _POS,
                "max_radius": {"type": "integer", "minimum": 1},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "weight_floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "radius": {"type": "integer", "minimum": 0},
                "batch": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "channel": {"enum": ["none", "rayleigh"]},
        "perspective": {"enum": ["room", "user"]},
        "theta_db": _DB_GRID,
        "s": {"type": "array", "items": _NONNEG, "minItems": 1},
        "room": {"type": "array", "items": {"type": "integer"}},
        "link": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"nu": _POS, "sigma2": _NONNEG, "sigma2_second": _NONNEG,
                           "theta2_db": {"type": "number"}},
        },
        "building": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "extents": {"type": "array", "items": _EXTENT, "minItems": 6, "maxItems": 6},
                "oob": {"type": "array", "items": _NONNEG, "minItems": 6, "maxItems": 6},
            },
        },
        "window_office": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "l_base": {"type": "number", "minimum": 0, "maximum": 1},
                "l_w_db": {"type": ["number", "null"]},
            },
        },
        "freespace": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 3},
                "densities": {"type": "array", "items": _POS, "minItems": 1},
            },
        },
        "observation_window": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            "minItems": 2,
        },
        "output": {"type": "string"},
    },
}

DEFAULTS: dict[str, Any] = {
    "grid": {"n": 3, "mu": 1.0, "r": 0.1, "k_db": -10.0},
    "series": {"radius": 16, "tol": 1e-10, "max_radius": 512},
    "sim": {"samples": 100_000, "seed": 0, "weight_floor": 1e-9, "batch": 20_000, "workers": 1},
    "channel": "rayleigh",
    "perspective": "room",
    "theta_db": {"start": -10.0, "stop": 20.0, "num": 31},
    "s": [0.1, 1.0, 10.0],
    "link": {"nu": 1.0, "sigma2": 0.0, "sigma2_second": 0.0},
    "building": {"extents": [3.0, None, None, None, None, None], "oob": [0.0] * 6},
    "window_office": {"l_base": 0.5, "l_w_db": -3.0},
    "freespace": {"alpha": 4.0, "densities": [0.1, 0.4, 1.2]},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


@dataclass
class RunConfig:
    """Fully resolved configuration (defaults merged with the user document)."""

    doc: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        user: dict = {}
        if path is not None:
            try:
                user = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(user, dict):
                raise ConfigError("config root must be an object")
            validate(user)
        merged = _merge(DEFAULTS, user)
        if "lam" in user.get("grid", {}):
            merged["grid"].pop("r", None)
        if "k" in user.get("grid", {}):
            merged["grid"].pop("k_db", None)
        if overrides:
            merged = _merge(merged, overrides)
        validate(merged)
        cfg = cls(merged)
        cfg.grid_params()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, separators=(",", ":"))

    def with_grid(self, **changes) -> "RunConfig":
        doc = copy.deepcopy(self.doc)
        grid = doc["grid"]
        for key, val in changes.items():
            if key == "k":
                grid.pop("k_db", None)
            if key == "lam":
                grid.pop("r", None)
            if key == "r":
                grid.pop("lam", None)
            grid[key] = val
        return RunConfig(doc)

    def grid_params(self) -> GridParams:
        g = self.doc["grid"]
        n = int(g.get("n", 3))

        def expand(v, name):
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            if arr.size == 1:
                arr = np.repeat(arr, n)
            if arr.size != n:
                raise ConfigError(f"grid.{name} must have {n} entries")
            return arr

        mu = expand(g.get("mu", 1.0), "mu")
        lam = expand(g["lam"], "lam") if "lam" in g else expand(g.get("r", 0.1), "r") * mu
        if "k" in g:
            k = expand(g["k"], "k")
        else:
            k = np.asarray(db_to_linear(expand(g.get("k_db", -10.0), "k_db")))
        try:
            return GridParams(mu=tuple(mu), lam=tuple(lam), k=tuple(k))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def series(self) -> SeriesControl:
        try:
            return SeriesControl(**self.doc["series"])
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def sim(self) -> SimConfig:
        try:
            return SimConfig(**self.doc["sim"])
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def thetas_db(self) -> np.ndarray:
        grid = self.doc["theta_db"]
        if isinstance(grid, dict):
            return np.linspace(grid["start"], grid["stop"], grid["num"])
        return np.asarray(grid, dtype=float)

    def room(self, n: int) -> tuple[int, ...]:
        room = tuple(self.doc.get("room", [0] * n))
        if len(room) != n:
            raise ConfigError(f"room must have {n} entries")
        return room

    def building(self) -> tuple[BuildingExtents, OobInterference]:
        b = self.doc["building"]
        ext = tuple(math.inf if v in (None, "inf") else float(v) for v in b["extents"])
        try:
            return BuildingExtents(ext), OobInterference(tuple(b["oob"]))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def window_model(self) -> WindowModel:
        w = self.doc["window_office"]
        lw = 0.0 if w.get("l_w_db") is None else float(db_to_linear(w["l_w_db"]))
        return WindowModel.geometric(float(w["l_base"]), lw)

    def freespace(self) -> tuple[float, list[float]]:
        f = self.doc["freespace"]
        FreeSpaceParams(1.0, f["alpha"])
        return float(f["alpha"]), [float(d) for d in f["densities"]]
