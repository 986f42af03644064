"""Flat ``key = value`` config files mapped onto parameter dataclasses.

Blank lines and ``#`` comments are ignored. List-valued fields take a
comma-separated value. Precedence when resolving a run's parameters is
built-in default < config file < explicit override.
"""

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path
from typing import Any, Mapping, TypeVar

T = TypeVar("T")


class ConfigError(ValueError):
    pass


def read_kv(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def _coerce(raw: Any, hint: Any, key: str) -> Any:
    if not isinstance(raw, str):
        return raw
    origin = typing.get_origin(hint)
    if origin in (tuple, list):
        items = [item.strip() for item in raw.split(",") if item.strip()]
        args = typing.get_args(hint)
        inner = args[0] if args else str
        return origin(_coerce(item, inner, key) for item in items)
    if origin is typing.Union or str(origin) == "types.UnionType":
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("", "none", "null"):
            return None
        return _coerce(raw, args[0], key)
    try:
        if hint is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {hint.__name__}") from None
    return raw


def build(cls: type[T], *layers: Mapping[str, Any] | None) -> T:
    """Instantiate dataclass ``cls`` from defaults overlaid by ``layers`` in order.

    ``None`` values inside a layer mean "not given" and do not override.
    """
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
    merged: dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        for key, value in layer.items():
            if key not in names:
                raise ConfigError(f"unknown {cls.__name__} key {key!r}")
            if value is None:
                continue
            merged[key] = _coerce(value, hints[key], key)
    return cls(**merged)


def to_dict(obj: Any) -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out
