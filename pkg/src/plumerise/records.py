"""Measurement records and wind-table ingestion.

A MeasurementRecord is one image's plume-rise result: the wind angles, the
leveling point in image and ground coordinates, the rise and rise distance,
plus processing flags. Records persist as line-delimited JSON so logs can be
appended to, streamed, and diffed. Failure records (error set, measurement
fields empty) share the same shape so a batch of N images always yields N
lines.

Wind directions come from a two-column CSV (timestamp, degrees from north)
and are matched to images by nearest timestamp within a configurable gap.
"""

from __future__ import annotations

import csv
import io
import json
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

from .geometry import WindRecord

WIND_HEADER = ("timestamp", "wd_deg")
DEFAULT_MAX_GAP = timedelta(hours=1)

KNOWN_FLAGS = ("truncated", "vertical_plume", "negative_rise", "fit_diverged")

_MASK_NAME = re.compile(r"^(?P<id>.+)_(?P<ts>\d{8}T\d{6}Z)\.(pgm|pnm|pbm)$")


class ParseError(ValueError):
    """CSV parse failure; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonMonotonicTimestamps(ValueError):
    """Duplicate timestamps in a wind table."""


class NoWindData(LookupError):
    """No wind record close enough to the requested instant."""


@dataclass(frozen=True)
class MeasurementRecord:
    """One image's result, mirroring the site log column layout."""

    image_id: str
    timestamp: Optional[datetime]
    phi_deg: Optional[float] = None
    theta_deg: Optional[float] = None  # raw signed phi - plane_azimuth
    x_r_px: Optional[float] = None
    z_r_px: Optional[float] = None
    x_r_m: Optional[float] = None
    z_r_m: Optional[float] = None
    g_r_m_per_px: Optional[float] = None
    delta_z_m: Optional[float] = None
    x_max_m: Optional[float] = None
    flags: frozenset[str] = frozenset()
    error: Optional[str] = None
    run_id: str = ""

    def __post_init__(self):
        unknown = set(self.flags) - set(KNOWN_FLAGS)
        if unknown:
            raise ValueError(f"unknown flags {sorted(unknown)}")
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def ok(self) -> bool:
        return self.error is None


def record_to_json(rec: MeasurementRecord) -> str:
    """Serialize to one JSON line with stable key order."""
    payload = {
        "image_id": rec.image_id,
        "timestamp": rec.timestamp.isoformat().replace("+00:00", "Z")
        if rec.timestamp
        else None,
        "phi_deg": rec.phi_deg,
        "theta_deg": rec.theta_deg,
        "x_r_px": rec.x_r_px,
        "z_r_px": rec.z_r_px,
        "x_r_m": rec.x_r_m,
        "z_r_m": rec.z_r_m,
        "g_r_m_per_px": rec.g_r_m_per_px,
        "delta_z_m": rec.delta_z_m,
        "x_max_m": rec.x_max_m,
        "flags": sorted(rec.flags),
        "error": rec.error,
        "run_id": rec.run_id,
    }
    return json.dumps(payload, sort_keys=True, allow_nan=False)


def record_from_json(line: str) -> MeasurementRecord:
    data = json.loads(line)
    ts = data.get("timestamp")
    return MeasurementRecord(
        image_id=data["image_id"],
        timestamp=datetime.fromisoformat(ts.replace("Z", "+00:00")) if ts else None,
        phi_deg=data.get("phi_deg"),
        theta_deg=data.get("theta_deg"),
        x_r_px=data.get("x_r_px"),
        z_r_px=data.get("z_r_px"),
        x_r_m=data.get("x_r_m"),
        z_r_m=data.get("z_r_m"),
        g_r_m_per_px=data.get("g_r_m_per_px"),
        delta_z_m=data.get("delta_z_m"),
        x_max_m=data.get("x_max_m"),
        flags=frozenset(data.get("flags", [])),
        error=data.get("error"),
        run_id=data.get("run_id", ""),
    )


@dataclass(frozen=True)
class WindTable:
    """Wind records with strictly increasing timestamps."""

    records: tuple[WindRecord, ...]
    _times: tuple[datetime, ...] = field(init=False, repr=False)

    def __post_init__(self):
        times = tuple(r.timestamp for r in self.records)
        for earlier, later in zip(times, times[1:]):
            if later <= earlier:
                raise NonMonotonicTimestamps(f"{later} does not follow {earlier}")
        object.__setattr__(self, "_times", times)

    def __len__(self) -> int:
        return len(self.records)


def _parse_timestamp(text: str, line: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ParseError(f"bad ISO-8601 timestamp {text!r}", line) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def load_wind_csv(text: str) -> WindTable:
    """Parse a `timestamp,wd_deg` CSV into a sorted wind table.

    Rows may arrive in any order; duplicates raise NonMonotonicTimestamps.
    Directions are normalized into [0, 360).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, expected a header row", 1) from None
    if tuple(h.strip() for h in header) != WIND_HEADER:
        raise ParseError(f"header must be {','.join(WIND_HEADER)}, got {header}", 1)
    records = []
    for idx, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", idx)
        ts = _parse_timestamp(row[0].strip(), idx)
        try:
            wd = float(row[1])
        except ValueError:
            raise ParseError(f"bad wind direction {row[1]!r}", idx) from None
        records.append(WindRecord(timestamp=ts, phi_deg=wd))
    records.sort(key=lambda r: r.timestamp)
    return WindTable(records=tuple(records))


def wind_at(
    table: WindTable, t: datetime, max_gap: timedelta = DEFAULT_MAX_GAP
) -> WindRecord:
    """Nearest-in-time wind record; ties resolve to the earlier record.

    Raises:
        NoWindData: empty table or nearest record farther than max_gap.
    """
    if len(table) == 0:
        raise NoWindData("wind table is empty")
    times = table._times
    pos = bisect_left(times, t)
    candidates = []
    if pos > 0:
        candidates.append(pos - 1)
    if pos < len(times):
        candidates.append(pos)
    # min() keeps the earlier record on equal gaps because it scans in order
    best = min(candidates, key=lambda i: abs(times[i] - t))
    gap = abs(times[best] - t)
    if gap > max_gap:
        raise NoWindData(f"nearest wind record is {gap} away (max {max_gap})")
    return table.records[best]


def parse_mask_filename(name: str) -> tuple[str, datetime]:
    """Extract (image_id, UTC timestamp) from `<id>_YYYYMMDDTHHMMSSZ.pgm`."""
    m = _MASK_NAME.match(name)
    if not m:
        raise ValueError(f"mask filename {name!r} does not match <id>_<timestamp>Z.pgm")
    ts = datetime.strptime(m.group("ts"), "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    return m.group("id"), ts


def format_mask_filename(image_id: str, ts: datetime) -> str:
    return f"{image_id}_{ts.strftime('%Y%m%dT%H%M%SZ')}.pgm"
