"""Helpers for the dataclass-based configuration objects."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any, TypeVar

from scribble_seg.common.errors import ConfigError

T = TypeVar("T")


def dataclass_from_dict(cls: type[T], data: dict | None, section: str = "") -> T:
    """Build a flat config dataclass from a dict, rejecting unknown keys.

    Lists are converted to tuples for tuple-typed defaults so that configs read
    from JSON compare equal to configs built in code.
    """
    data = dict(data or {})
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f" in [{section}]" if section else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")

    kwargs = {}
    for name, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid [{section or cls.__name__}] config: {e}") from e


def dataclass_to_dict(obj: Any) -> dict:
    """Convert a config dataclass to a JSON-ready dict (tuples become lists)."""

    def convert(value):
        if dataclasses.is_dataclass(value):
            return {f.name: convert(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, (tuple, list)):
            return [convert(v) for v in value]
        return value

    return convert(obj)


def canonical_json(data: Any) -> str:
    """Serialize to the canonical form used for hashing and for ``config.json``."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def stable_hash(data: Any) -> str:
    """Return a short SHA-256 hex digest of the canonical JSON of ``data``."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]
