"""Run configuration: one flat JSON object with a ``kind`` discriminator.

Common keys: kind, seed, out, formats, filter_omega_c, validate. Every other
key is a field of the scenario selected by ``kind`` (see SCENARIOS).
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass

from ..experiments.dnp import DNPScenario
from ..experiments.torus import TorusScenario
from ..experiments.water import WaterScenario
from .export import FORMATS

SCENARIOS = {"torus": TorusScenario, "water": WaterScenario, "dnp": DNPScenario}
COMMON_KEYS = ("kind", "seed", "out", "formats", "filter_omega_c", "validate")
U64 = 2 ** 64

# value constraints checked before construction so each message names its key
_POSITIVE = {
    "torus": ("r1", "r2", "m", "speed", "dt", "n_steps", "record_every"),
    "water": ("bond", "angle_deg", "m_oxygen", "m_hydrogen", "stiffness", "dt", "n_steps",
              "record_every"),
    "dnp": ("T1e", "T2e", "T1n", "T2n", "dt", "total_time", "n_paths", "record_every",
            "S_perp_e", "S_z_e", "S_perp_n", "S_z_n"),
}
_NON_NEGATIVE = {"dnp": ("g_c", "t_on", "settle")}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class RunConfig:
    kind: str
    scenario: object
    seed: int = 0
    out: str = "out"
    formats: tuple = ("csv",)
    filter_omega_c: float | None = None
    validate: bool = False


def _type_ok(value, hint) -> bool:
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        return any(_type_ok(value, h) for h in typing.get_args(hint))
    if hint is type(None):
        return value is None
    if hint is bool:
        return isinstance(value, bool)
    if hint is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if hint is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if hint is str:
        return isinstance(value, str)
    if hint is tuple:
        return isinstance(value, (list, tuple)) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    return True


def _type_name(hint) -> str:
    return getattr(hint, "__name__", str(hint))


def parse_config_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(["configuration must be a JSON object"])
    errors: list[str] = []
    kind = data.get("kind")
    if kind is None:
        raise ConfigError(["missing required key 'kind'"])
    if kind not in SCENARIOS:
        raise ConfigError([f"key 'kind': unknown scenario {kind!r}; choose from {sorted(SCENARIOS)}"])
    cls = SCENARIOS[kind]
    hints = typing.get_type_hints(cls)
    fields = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields and key not in COMMON_KEYS:
            errors.append(f"unknown key {key!r} for kind {kind!r}")

    seed = data.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < U64):
        errors.append("key 'seed': must be an unsigned 64-bit integer")
    out = data.get("out", "out")
    if not isinstance(out, str):
        errors.append("key 'out': must be a string")
    formats = data.get("formats", ["csv"])
    if isinstance(formats, str):
        formats = [formats]
    if not (isinstance(formats, list) and formats and all(f in FORMATS for f in formats)):
        errors.append(f"key 'formats': must be a non-empty list drawn from {list(FORMATS)}")
    omega_c = data.get("filter_omega_c")
    if omega_c is not None and not (_type_ok(omega_c, float) and omega_c > 0):
        errors.append("key 'filter_omega_c': must be a positive number")
    validate = data.get("validate", False)
    if not isinstance(validate, bool):
        errors.append("key 'validate': must be true or false")

    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            continue
        if not _type_ok(value, hints[key]):
            errors.append(f"key {key!r}: expected {_type_name(hints[key])}, got {type(value).__name__}")
            continue
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    for key in _POSITIVE.get(kind, ()):
        if key in kwargs and kwargs[key] is not None and not kwargs[key] > 0:
            errors.append(f"key {key!r}: must be positive")
    for key in _NON_NEGATIVE.get(kind, ()):
        if key in kwargs and not kwargs[key] >= 0:
            errors.append(f"key {key!r}: must be non-negative")
    if errors:
        raise ConfigError(errors)
    try:
        scenario = cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError([str(exc)]) from None
    return RunConfig(kind, scenario, seed, out, tuple(formats), omega_c, validate)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from None
    return parse_config_dict(data)


def config_to_dict(config: RunConfig) -> dict:
    data = {"kind": config.kind}
    for f in dataclasses.fields(config.scenario):
        value = getattr(config.scenario, f.name)
        data[f.name] = list(value) if isinstance(value, tuple) else value
    data.update({"seed": config.seed, "out": config.out, "formats": list(config.formats),
                 "filter_omega_c": config.filter_omega_c, "validate": config.validate})
    return data


def serialize(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=False)


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Apply command-line values (None means not given); flags win over the file."""
    data = config_to_dict(config)
    if overrides.get("paths") is not None:
        if config.kind != "dnp":
            raise ConfigError([f"--paths applies to kind 'dnp', not {config.kind!r}"])
        data["n_paths"] = overrides["paths"]
    for key in ("seed", "out", "validate"):
        if overrides.get(key) is not None:
            data[key] = overrides[key]
    if overrides.get("format") is not None:
        data["formats"] = [overrides["format"]]
    return parse_config_dict(data)
