"""Plain-text ``key = value`` run configuration mapped onto :class:`TrainConfig`."""

from __future__ import annotations

import dataclasses
import typing

from .bench import TrainConfig
from .errors import ConfigError, InfoClipError

REQUIRED = ("seed", "steps")


def _field_types():
    hints = typing.get_type_hints(TrainConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(TrainConfig)}


def _parse_value(raw: str, kind, line_no: int, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if typing.get_origin(kind) is typing.Literal:
            if raw not in typing.get_args(kind):
                raise ValueError(raw)
            return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r}", offset=line_no) from None
    raise ConfigError(f"key {key!r} has an unsupported type", offset=line_no)


def parse_run_config(text: str) -> TrainConfig:
    """Parse a run config. ``#`` starts a comment; unknown or repeated keys are errors.

    ``offset`` on the raised :class:`ConfigError` is the 1-based line number.
    """
    types = _field_types()
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", offset=line_no)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}", offset=line_no)
        if key in values:
            raise ConfigError(f"duplicate config key {key!r}", offset=line_no)
        values[key] = _parse_value(raw, types[key], line_no, key)
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    try:
        return TrainConfig(**values)
    except InfoClipError as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())


def format_run_config(cfg: TrainConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
