# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from retas import logger
from retas.helpers import DataError, SpatialWindow, utils

TIE_STEP = 1e-9
COLUMNS = ("time", "x", "y", "magnitude")


class CatalogFormat(str, Enum):
    CSV = "csv"


@dataclass(frozen=True)
class Event:
    t: float
    x: float
    y: float
    m: float


@dataclass(frozen=True, eq=False)
class Catalog:
    """
    An ordered earthquake catalog.

    Times are days since `origin`, events strictly increase in time and
    every event lies in `window`, no later than `T` and at or above `m0`.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    m: np.ndarray
    T: float
    m0: float
    window: SpatialWindow = field(default_factory=SpatialWindow.whole_plane)
    origin: Optional[datetime] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "x", "y", "m"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "m0", float(self.m0))
        if not (len(self.t) == len(self.x) == len(self.y) == len(self.m)):
            raise DataError("Catalog columns have different lengths")

    @property
    def n(self) -> int:
        return len(self.t)

    def __len__(self) -> int:
        return self.n

    @property
    def dropped_count(self) -> int:
        return sum(v for k, v in self.metadata.items() if k.startswith("dropped_"))

    def __getitem__(self, i: int) -> Event:
        return Event(self.t[i], self.x[i], self.y[i], self.m[i])

    def __iter__(self):
        return (self[i] for i in range(self.n))

    def prefix(self, k: int, T: Optional[float] = None) -> "Catalog":
        """The first k events, censored at T (default: the k-th event time)."""
        return Catalog(
            self.t[:k],
            self.x[:k],
            self.y[:k],
            self.m[:k],
            T=self.t[k - 1] if T is None else T,
            m0=self.m0,
            window=self.window,
            origin=self.origin,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.t, "x": self.x, "y": self.y, "magnitude": self.m})

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "m0": self.m0,
            "n": self.n,
            "window": self.window.to_dict(),
            "origin": self.origin.isoformat() if self.origin else None,
        }


@dataclass(frozen=True)
class Violation:
    index: Optional[int]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __len__(self) -> int:
        return len(self.violations)


def validate(catalog: Catalog) -> ValidationReport:
    """List every violated catalog invariant; never raises."""
    found = []
    if catalog.n == 0:
        found.append(Violation(None, "catalog is empty"))
    for i in range(catalog.n):
        t, x, y, m = catalog.t[i], catalog.x[i], catalog.y[i], catalog.m[i]
        if not np.isfinite(t) or t < 0:
            found.append(Violation(i, f"time {t} is not a finite nonnegative number"))
        elif i == 0 and not t > 0:
            found.append(Violation(i, f"first event at time {t} does not follow the time origin"))
        if t > catalog.T:
            found.append(Violation(i, f"time {t} exceeds censoring time {catalog.T}"))
        if i > 0 and not t > catalog.t[i - 1]:
            found.append(Violation(i, f"time {t} does not exceed previous time {catalog.t[i - 1]}"))
        if m < catalog.m0:
            found.append(Violation(i, f"magnitude {m} below threshold {catalog.m0}"))
        if not catalog.window.contains(x, y):
            found.append(Violation(i, f"epicentre ({x}, {y}) outside the spatial window"))
    return ValidationReport(tuple(found))


def _float_or_nan(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def _parse_floats(raw: pd.Series, name: str) -> np.ndarray:
    # Python's float() round-trips 17-digit output exactly
    parsed = np.array([_float_or_nan(v) for v in raw], dtype=float)
    bad = np.flatnonzero(~np.isfinite(parsed))
    if bad.size:
        row = int(bad[0])
        raise DataError(f"Unparsable {name} {raw.iloc[row]!r} in row {row + 2}")
    return parsed


def _parse_times(raw: pd.Series, origin: Optional[datetime]) -> tuple[np.ndarray, Optional[datetime]]:
    numeric = np.array([_float_or_nan(v) for v in raw], dtype=float)
    if np.isfinite(numeric).all():
        return numeric, origin

    stamps = pd.to_datetime(raw, errors="coerce", utc=True, format="ISO8601")
    bad = stamps.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError(f"Unparsable time {raw.iloc[row]!r} in row {row + 2}")
    if origin is None:
        first = stamps.min()
        origin = datetime(first.year, first.month, first.day, tzinfo=timezone.utc)
        if pd.Timestamp(origin) == first:
            origin -= timedelta(days=1)
    ref = pd.Timestamp(origin if origin.tzinfo else origin.replace(tzinfo=timezone.utc))
    days = (stamps - ref) / pd.Timedelta(days=1)
    return days.to_numpy(dtype=float), origin


def _to_days(value, origin: Optional[datetime]) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    stamp = pd.Timestamp(value)
    if stamp.tzinfo is None:
        stamp = stamp.tz_localize("UTC")
    if origin is None:
        raise DataError("A calendar end time needs a calendar origin")
    ref = pd.Timestamp(origin if origin.tzinfo else origin.replace(tzinfo=timezone.utc))
    return float((stamp - ref) / pd.Timedelta(days=1))


def break_ties(t: np.ndarray) -> tuple[np.ndarray, int]:
    """Shift the k-th duplicate of a time by k * TIE_STEP days; returns new times and count shifted."""
    t = np.array(t, dtype=float)
    if t.size < 2:
        return t, 0
    _, inverse, counts = np.unique(t, return_inverse=True, return_counts=True)
    if counts.max() == 1:
        return t, 0
    rank = np.zeros(t.size, dtype=int)
    seen: dict[int, int] = {}
    for i, g in enumerate(inverse):
        rank[i] = seen.get(g, 0)
        seen[g] = rank[i] + 1
    t = t + rank * TIE_STEP
    # shifted duplicates may collide with the next distinct time
    for i in range(1, t.size):
        if t[i] <= t[i - 1]:
            t[i] = t[i - 1] + TIE_STEP
    return t, int((rank > 0).sum())


def _metadata_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def load_catalog(
    path: str | Path,
    fmt: CatalogFormat = CatalogFormat.CSV,
    m0: Optional[float] = None,
    window: Optional[SpatialWindow] = None,
    origin: Optional[datetime] = None,
    end=None,
    columns: Optional[dict] = None,
) -> Catalog:
    """
    Read, filter and validate a catalog file.

    Missing arguments fall back to a `.meta.json` sidecar written by
    `save_catalog`, then to defaults (m0 = smallest magnitude, whole plane,
    T = last event time).
    """
    path = Path(path)
    if CatalogFormat(fmt) is not CatalogFormat.CSV:
        raise DataError(f"Unsupported catalog format: {fmt}")
    if not path.is_file():
        raise DataError(f"Catalog file not found: {path}")

    meta = {}
    if _metadata_path(path).is_file():
        meta = utils.read_json(_metadata_path(path))
    if m0 is None:
        m0 = meta.get("m0")
    if window is None:
        window = SpatialWindow.from_dict(meta.get("window"))
    if origin is None and meta.get("origin"):
        origin = datetime.fromisoformat(meta["origin"])
    if end is None:
        end = meta.get("T")

    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as ex:
        raise DataError(f"Cannot parse {path}: {ex}") from ex

    mapping = {name: name for name in COLUMNS}
    mapping.update(columns or {})
    missing = [mapping[name] for name in COLUMNS if mapping[name] not in frame.columns]
    if missing:
        raise DataError(f"Missing columns in {path}: {', '.join(missing)}")

    values = {name: _parse_floats(frame[mapping[name]], name) for name in ("x", "y", "magnitude")}
    t, origin = _parse_times(frame[mapping["time"]], origin)

    order = np.argsort(t, kind="stable")
    was_unsorted = bool(np.any(order != np.arange(t.size)))
    if was_unsorted:
        logger.warning(f"{path.name}: events were not in time order and have been sorted.")
    t = t[order]
    x, y, m = (values[name][order] for name in ("x", "y", "magnitude"))

    if m0 is None:
        m0 = float(m.min()) if m.size else 0.0
    T = _to_days(end, origin)

    keep_mag = m >= m0
    keep_win = window.contains(x, y)
    keep_time = (t >= 0) & (t <= T if T is not None else True)
    keep = keep_mag & keep_win & keep_time
    dropped = {
        "dropped_below_m0": int((~keep_mag).sum()),
        "dropped_outside_window": int((keep_mag & ~keep_win).sum()),
        "dropped_outside_time": int((keep_mag & keep_win & ~keep_time).sum()),
    }
    t, x, y, m = t[keep], x[keep], y[keep], m[keep]
    if t.size == 0:
        raise DataError(f"No events left in {path} after filtering")

    t, ties = break_ties(t)
    if ties:
        logger.warning(f"{path.name}: {ties} tied event times perturbed by multiples of {TIE_STEP} days.")
    if T is None:
        T = float(t[-1])
    T = max(T, float(t[-1]))

    catalog = Catalog(
        t, x, y, m, T=T, m0=m0, window=window, origin=origin,
        metadata={**dropped, "ties_perturbed": ties, "was_unsorted": was_unsorted},
    )
    report = validate(catalog)
    if not report.ok:
        raise DataError(f"Catalog {path} is invalid: {report.violations[0].message}")
    logger.info(
        f"Loaded {catalog.n} events from {path.name} "
        f"({sum(dropped.values())} dropped, T={catalog.T:.6g} days, m0={catalog.m0})."
    )
    return catalog


def save_catalog(catalog: Catalog, path: str | Path) -> Path:
    """Write the catalog CSV at full precision plus its `.meta.json` sidecar."""
    path = utils.write_csv(catalog.to_frame(), path)
    utils.write_json(catalog.to_dict(), _metadata_path(path))
    return path


def catalog_from_arrays(t, x, y, m, T=None, m0=None, window=None, origin=None) -> Catalog:
    """Build a validated catalog from in-memory arrays (sorted, ties broken)."""
    t = np.asarray(t, dtype=float)
    order = np.argsort(t, kind="stable")
    t, ties = break_ties(t[order])
    x = np.asarray(x, dtype=float)[order]
    y = np.asarray(y, dtype=float)[order]
    m = np.asarray(m, dtype=float)[order]
    if t.size == 0:
        raise DataError("Cannot build an empty catalog")
    catalog = Catalog(
        t, x, y, m,
        T=float(t[-1]) if T is None else T,
        m0=float(m.min()) if m0 is None else m0,
        window=window or SpatialWindow.whole_plane(),
        origin=origin,
        metadata={"ties_perturbed": ties},
    )
    report = validate(catalog)
    if not report.ok:
        raise DataError(f"Invalid catalog: {report.violations[0].message}")
    return catalog
