"""Run configuration: strict parsing of TOML (or JSON) with defaults.

Resolution order is schema defaults, then the scenario's own defaults,
then the user's file.  The resolved mapping is what gets written to
``manifest.json`` and it re-parses to the same config.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_NUM = (int, float)

# section -> key -> (accepted types, default); a default of ``None`` means optional
SCHEMA: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "grid": {
        "n": ((int,), None),
        "size": ((int,), 128),
        "length": (_NUM, 2.0),
        "h": (_NUM, None),
    },
    "anisotropy": {
        "preset": ((str,), "square"),
        "vertices": ((list,), None),
    },
    "forcing": {
        "kind": ((str,), "zero"),
        "c": (_NUM, 1.0),
        "r": (_NUM, 1.0),
        "inner": (_NUM, 0.0),
        "center": ((list,), None),
        "offset": (_NUM, 0.0),
        "scale": (_NUM, 1.0),
        "tents": ((list,), None),
        "x": ((list,), None),
        "f": ((list,), None),
    },
    "initial": {
        "kind": ((str,), "wulff"),
        "R0": (_NUM, 0.5),
        "clip": (_NUM, 0.15),
        "floor": (_NUM, None),
    },
    "prox": {
        "a_schedule": ((list,), [1e-2, 1e-3, 1e-4, 1e-5]),
        "tol": (_NUM, 1e-10),
        "max_iters": ((int,), 200_000),
        "threshold": ((str, float, int), "exact"),
    },
    "facet1d": {
        "h": (_NUM, 1e-3),
        "dt": (_NUM, 1e-4),
        "T": (_NUM, 0.1),
        "half_width": (_NUM, 1.5),
        "cells": ((int,), 2000),
        "longer": (_NUM, 1.25),
    },
    "scheme": {
        "safety": (_NUM, 4.0),
        "delta_grad": (_NUM, None),
        "dt": (_NUM, None),
        "guard": ((int,), 3),
        "refresh": ((int,), 8),
    },
    "mobility": {
        "form": ((str,), "linear"),
        "beta": (_NUM + (list,), 1.0),
        "cap": (_NUM, None),
    },
    "regularization": {
        "mode": ((str,), "A"),
        "m": ((int,), 16),
        "delta": (_NUM, None),
    },
    "time": {
        "T": (_NUM, 0.05),
        "emit_every": (_NUM, 0.005),
    },
    "suite": {
        "cases": ((int,), 20),
        "scenarios": ((list,), None),
    },
    "output": {
        "svg": ((bool,), True),
        "frames": ((bool,), True),
    },
}

TOP_LEVEL = {"scenario": (str,), "seed": (int,), "out": (str,)}


@dataclass
class RunConfig:
    scenario: str
    seed: int = 0
    out: str | None = None
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"scenario": self.scenario, "seed": self.seed}
        if self.out is not None:
            d["out"] = self.out
        for name in SCHEMA:
            d[name] = {k: v for k, v in self.sections[name].items() if v is not None}
        return d

    def with_overrides(self, **top) -> RunConfig:
        c = copy.deepcopy(self)
        for k, v in top.items():
            setattr(c, k, v)
        return c


def _check_type(key: str, value: Any, types: tuple[type, ...]) -> Any:
    # bool is an int subclass; only accept it where bool is declared
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(key, f"expected {_type_names(types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(key, f"expected {_type_names(types)}, got {type(value).__name__}")
    if float in types and isinstance(value, int):
        return float(value)
    return value


def _type_names(types) -> str:
    return " or ".join(t.__name__ for t in types)


def parse_mapping(raw: dict[str, Any], scenario_defaults: dict[str, dict[str, Any]] | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a table")
    for key in raw:
        if key not in TOP_LEVEL and key not in SCHEMA:
            raise ConfigError(key, "unknown key")
    if "scenario" not in raw:
        raise ConfigError("scenario", "missing required key")
    top = {k: _check_type(k, raw[k], TOP_LEVEL[k]) for k in TOP_LEVEL if k in raw}
    if scenario_defaults is None:
        from .scenarios import scenario_defaults as lookup

        scenario_defaults = lookup(top["scenario"])
    sections: dict[str, dict[str, Any]] = {}
    for name, keys in SCHEMA.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(name, "expected a table")
        for key in given:
            if key not in keys:
                raise ConfigError(f"{name}.{key}", "unknown key")
        resolved = {k: copy.deepcopy(default) for k, (_, default) in keys.items()}
        resolved.update(copy.deepcopy(scenario_defaults.get(name, {})))
        for key, value in given.items():
            resolved[key] = _check_type(f"{name}.{key}", value, keys[key][0])
        sections[name] = resolved
    return RunConfig(top["scenario"], top.get("seed", 0), top.get("out"), sections)


def parse_config(text: str, fmt: str = "toml") -> RunConfig:
    """Parse TOML (default) or JSON text into a validated :class:`RunConfig`."""
    if fmt == "toml":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<syntax>", str(exc)) from None
    elif fmt == "json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<syntax>", str(exc)) from None
    else:
        raise ValueError(f"unknown config format {fmt!r}")
    return parse_mapping(raw)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, "json" if str(path).endswith(".json") else "toml")
