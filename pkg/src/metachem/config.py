"""Run configuration files, written in the same section syntax as graph files.

    [run]
    seed 7
    [swarm]
    steps 50
    [mapping]
    R 0 25 0

Each line is a key followed by its value. Values are coerced to the field
types of the target dataclass; command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
import typing
from typing import Any

SECTIONS = ("run", "stringcat", "ja", "swarm", "nested", "mapping")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def parse_config(text: str) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line[1:-1].strip() if line.endswith("]") else ""
            if name not in SECTIONS:
                raise ConfigError(f"unknown section {line!r}", lineno)
            section = name
            out.setdefault(section, {})
            continue
        if section is None:
            raise ConfigError("content before first section", lineno)
        key, _, value = line.partition(" ")
        if not value.strip():
            raise ConfigError(f"missing value for {key!r}", lineno)
        out[section][key] = value.strip()
    return out


def _coerce(text: str, tp: Any) -> Any:
    args = typing.get_args(tp)
    if type(None) in args:
        if text.lower() == "none":
            return None
        tp = next(a for a in args if a is not type(None))
        args = typing.get_args(tp)
    origin = typing.get_origin(tp)
    if origin is tuple:
        parts = text.replace(",", " ").replace("x", " ").split()
        return tuple(_coerce(p, a) for p, a in zip(parts, args, strict=True))
    if tp is bool:
        if text.lower() not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"not a boolean: {text!r}")
        return text.lower() in ("true", "yes", "1")
    if tp in (int, float, str):
        return tp(text)
    raise TypeError(f"cannot read a {tp} from config text")


def apply(cls, values: dict[str, str], **overrides):
    """Instantiate dataclass ``cls`` from text ``values`` then keyword ``overrides`` (None ignored)."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kw: dict[str, Any] = {}
    for k, v in values.items():
        if k not in names:
            raise ConfigError(f"{cls.__name__} has no setting {k!r}")
        try:
            kw[k] = _coerce(v, hints[k])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{k}: {exc}") from None
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kw)


def mapping_overrides(values: dict[str, str]) -> dict[str, tuple[float, float, float]]:
    out = {}
    for k, v in values.items():
        nums = v.replace(",", " ").split()
        if len(nums) != 3:
            raise ConfigError(f"mapping {k} needs three coefficients")
        out[k] = tuple(float(x) for x in nums)
    return out
