# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from pathlib import Path

from retas.core.catalog import COLUMNS
from retas.helpers import ConfigError


def _list_modules() -> list[str]:
    """Command modules in this package: every public .py file except __init__."""
    return sorted(
        file.stem
        for file in Path(__file__).parent.glob("*.py")
        if file.is_file() and not file.name.startswith("_")
    )

all_modules = frozenset(_list_modules())


def parse_zeta(text: str) -> list[float]:
    """'0.5,1,1.5' -> [0.5, 1.0, 1.5]"""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as ex:
        raise ConfigError(f"Invalid --zeta list {text!r}") from ex
    if not values or any(not v > 0 for v in values):
        raise ConfigError(f"--zeta needs positive values, got {text!r}")
    return values


def parse_columns(text: str) -> dict:
    """'time=origintime,x=longitude' -> {'time': 'origintime', 'x': 'longitude'}"""
    mapping = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in COLUMNS or not value:
            raise ConfigError(f"Invalid --columns entry {item!r}; expected one of {', '.join(COLUMNS)}=NAME")
        mapping[key] = value
    return mapping
