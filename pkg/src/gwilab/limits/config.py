"""Experiment configuration files.

A config file is INI text with one section per experiment, for example::

    [strong-gwi]
    offspring = geometric:q=0.5
    immigration = poisson:m=1
    p = 100
    t = 1
    lambdas = 0.5, 1, 2, 4
    replicas = 200000
    tolerance = 0.01
    seed = 1

Keys not given take the defaults below; unknown keys are an error. Law
literals follow ``gwilab.trees.laws.parse_offspring``/``parse_dispatch``;
``scheme`` is ``linear`` (gamma_p = p) or ``power:exponent=<f>``.
"""
from __future__ import annotations

import configparser
from pathlib import Path
from typing import Any, Callable, Mapping

__all__ = ["ConfigError", "SCHEMAS", "resolve", "read_config"]


class ConfigError(ValueError):
    pass


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _int(text) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _str(text) -> str:
    return str(text).strip()


_COMMON: dict[str, tuple[Callable, Any]] = {"seed": (_int, 1)}

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "strong-gwi": {
        "offspring": (_str, "geometric:q=0.5"),
        "immigration": (_str, "poisson:m=1"),
        "x": (float, 0.0),
        "p": (_int, 100),
        "scheme": (_str, "linear"),
        "t": (float, 1.0),
        "lambdas": (_floats, (0.5, 1.0, 2.0, 4.0)),
        "replicas": (_int, 200_000),
        "tolerance": (float, 0.01),
        "mean_sigmas": (float, 4.0),
        "block": (_int, 8192),
        **_COMMON,
    },
    "ray-knight": {
        "offspring": (_str, "geometric:q=0.5"),
        "dispatch": (_str, "sizebiased"),
        "p": (_int, 100),
        "scheme": (_str, "linear"),
        "a": (float, 1.0),
        "lambdas": (_floats, (0.5, 1.0, 2.0, 4.0)),
        "replicas": (_int, 100_000),
        "tolerance": (float, 0.015),
        "exact_trees": (_int, 1000),
        "exact_depth": (_int, 30),
        "size_cap": (_int, 200_000),
        "block": (_int, 8192),
        **_COMMON,
    },
    "size-biased": {
        "offspring": (_str, "geometric:q=0.5"),
        "depth": (_int, 1),
        "n_list": (_ints, (1, 5, 10, 50)),
        "cap": (_int, 32),
        "threshold": (float, 0.01),
        "leak_tolerance": (float, 1e-3),
        **_COMMON,
    },
    "occupation": {
        "offspring": (_str, "geometric:q=0.5"),
        "dispatch": (_str, "sizebiased"),
        "p": (_int, 100),
        "scheme": (_str, "linear"),
        "paths": (_int, 1000),
        "depth": (_int, 20),
        "size_cap": (_int, 200_000),
        **_COMMON,
    },
    "self-consistency": {
        "offspring": (_str, "geometric:q=0.5"),
        "dispatch": (_str, "sizebiased"),
        "p_list": (_ints, (50, 100)),
        "scheme": (_str, "linear"),
        "t_grid": (_floats, (1.0,)),
        "replicas": (_int, 10_000),
        "tolerance": (float, 0.05),
        "block": (_int, 256),
        **_COMMON,
    },
    "extinction": {
        "offspring": (_str, "geometric:q=0.5"),
        "scheme": (_str, "linear"),
        "p": (_int, 100),
        "delta": (float, 1.0),
        "p_ladder": (_ints, (10, 100, 1000, 10000)),
        "reference": (_str, "none"),
        "tolerance": (float, 0.01),
        **_COMMON,
    },
}


def resolve(experiment: str, raw: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Typed config with defaults filled in; rejects unknown keys and bad values."""
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    schema = SCHEMAS[experiment]
    raw = dict(raw or {})
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for [{experiment}]: {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                out[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{experiment}] {key} = {raw[key]!r}: {exc}") from None
        else:
            out[key] = default
    return out


def read_config(path: str | Path, experiment: str) -> dict[str, Any]:
    """Reads section ``[experiment]`` of an INI file and resolves it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} not found")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not parser.has_section(experiment):
        raise ConfigError(f"{path} has no [{experiment}] section")
    return resolve(experiment, dict(parser.items(experiment)))
