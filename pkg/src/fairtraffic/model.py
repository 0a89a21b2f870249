"""Core domain types: anonymized traffic observations, PII handling, group partitions."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import date as Date
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

PROPORTION_TOLERANCE = 1e-12

#: Separator between canonicalized PII fields before digesting. A control
#: character cannot occur inside plates/identifiers, so field boundaries
#: are unambiguous.
_PII_SEPARATOR = b"\x1f"

MIN_SALT_BYTES = 16


class EmptyPiiField(ValueError):
    """A PII field required for anonymization is blank."""


class EmptyDataset(ValueError):
    """An operation that needs at least one record received none."""


class Weather(str, Enum):
    CLEAR = "clear"
    RAIN = "rain"
    FOG = "fog"
    SNOW = "snow"


class DayOfWeek(str, Enum):
    MON = "Mon"
    TUE = "Tue"
    WED = "Wed"
    THU = "Thu"
    FRI = "Fri"
    SAT = "Sat"
    SUN = "Sun"

    @classmethod
    def from_date(cls, day: Date) -> "DayOfWeek":
        return list(cls)[day.weekday()]

    @property
    def is_weekend(self) -> bool:
        return self in (DayOfWeek.SAT, DayOfWeek.SUN)


@dataclass(frozen=True)
class RawPii:
    """Transient bundle of identifying attributes, alive only until anonymization.

    Never serialized: repr is redacted so the fields cannot leak through logs
    or error messages.
    """

    license_plate: str
    vehicle_identifier: str
    timestamp: str
    driver_attributes: tuple[tuple[str, str], ...] = ()

    def __repr__(self) -> str:  # pragma: no cover - trivial
        return "RawPii(<redacted>)"

    def __str__(self) -> str:  # pragma: no cover - trivial
        return self.__repr__()


def anonymize_pii(pii: RawPii, salt: bytes) -> str:
    """Collapse all PII into one opaque, salted SHA-256 hex digest.

    Fields are concatenated in a fixed canonical order (plate, vehicle
    identifier, timestamp, then driver attributes in their given order) with
    explicit separators, so the same PII always maps to the same identifier
    and any one-character difference changes it.

    Raises EmptyPiiField if any field is blank, ValueError for a short salt.
    """
    if len(salt) < MIN_SALT_BYTES:
        raise ValueError(f"salt must be at least {MIN_SALT_BYTES} bytes, got {len(salt)}")
    parts = [pii.license_plate, pii.vehicle_identifier, pii.timestamp]
    for key, value in pii.driver_attributes:
        parts.extend([key, value])
    for part in parts:
        if not part.strip():
            raise EmptyPiiField("all PII fields must be non-empty")
    digest = hashlib.sha256()
    digest.update(salt)
    for part in parts:
        digest.update(_PII_SEPARATOR)
        digest.update(part.encode("utf-8"))
    return digest.hexdigest()


@dataclass(frozen=True)
class TrafficRecord:
    """One anonymized hourly traffic observation for a region."""

    anon_id: str
    region_id: str
    latitude: float
    longitude: float
    hour: int
    date: Date
    speed_kmh: float
    vehicle_count: int
    weather: Weather
    temperature_c: float
    day_of_week: DayOfWeek
    is_holiday: bool

    def __post_init__(self) -> None:
        if not self.anon_id:
            raise ValueError("anon_id must be non-empty")
        if not (0 <= self.hour <= 23):
            raise ValueError(f"hour must be in [0, 23], got {self.hour}")
        if not (-90.0 <= self.latitude <= 90.0):
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not (-180.0 <= self.longitude <= 180.0):
            raise ValueError(f"longitude out of range: {self.longitude}")
        if self.speed_kmh < 0:
            raise ValueError(f"speed_kmh must be non-negative, got {self.speed_kmh}")
        if self.vehicle_count < 0:
            raise ValueError(f"vehicle_count must be non-negative, got {self.vehicle_count}")
        if not (-5.0 <= self.temperature_c <= 25.0):
            raise ValueError(f"temperature_c out of [-5, 25]: {self.temperature_c}")


def location_key(row: "TrafficRecord | Mapping[str, object]") -> tuple[float, float]:
    """Two-decimal (latitude, longitude) key, the display granularity for coordinates."""
    lat = float(_field(row, "latitude"))
    lon = float(_field(row, "longitude"))
    return (round(lat, 2), round(lon, 2))


def _field(row: object, name: str):
    """Read a named field from a TrafficRecord or a projected row mapping."""
    if name == "location":
        return location_key(row)  # type: ignore[arg-type]
    if isinstance(row, Mapping):
        try:
            return row[name]
        except KeyError:
            raise KeyError(f"row is missing field {name!r}; check the query projection") from None
    return getattr(row, name)


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint index groups covering a dataset, with their proportions."""

    groups: Mapping[object, tuple[int, ...]]
    total: int
    proportions: Mapping[object, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        size = 0
        for indices in self.groups.values():
            size += len(indices)
            seen.update(indices)
        if size != self.total or len(seen) != self.total:
            raise ValueError("groups must be disjoint and cover every index exactly once")
        if seen and (min(seen) != 0 or max(seen) != self.total - 1):
            raise ValueError("group indices must cover 0..total-1")
        if self.proportions is None:
            object.__setattr__(
                self,
                "proportions",
                {key: len(indices) / self.total for key, indices in self.groups.items()},
            )
        total_phi = sum(self.proportions.values())
        if self.total and abs(total_phi - 1.0) > PROPORTION_TOLERANCE:
            raise ValueError(f"proportions must sum to 1, got {total_phi!r}")

    def group_of(self, index: int) -> object:
        for key, indices in self.groups.items():
            if index in indices:
                return key
        raise KeyError(index)

    def membership(self) -> list[object]:
        """Group key per index position, in index order."""
        out: list[object] = [None] * self.total
        for key, indices in self.groups.items():
            for i in indices:
                out[i] = key
        return out


def partition_groups(dataset: Sequence, key: str = "region_id") -> GroupPartition:
    """Split records into disjoint groups by a field, preserving first-seen order.

    `key` names a record field; the derived key "location" groups by the
    two-decimal coordinate pair.
    """
    if not dataset:
        raise EmptyDataset("cannot partition an empty dataset")
    groups: dict[object, list[int]] = {}
    for i, row in enumerate(dataset):
        groups.setdefault(_field(row, key), []).append(i)
    frozen = {k: tuple(v) for k, v in groups.items()}
    return GroupPartition(groups=frozen, total=len(dataset))


# --- CSV interchange -------------------------------------------------------

CSV_COLUMNS = (
    "region_id",
    "latitude",
    "longitude",
    "date",
    "hour",
    "day_of_week",
    "is_holiday",
    "weather",
    "temperature_c",
    "speed_kmh",
    "vehicle_count",
)

#: Columns the reader understands beyond the required set.
_OPTIONAL_COLUMNS = ("anon_id",)


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via a temp file and rename, so failures never leave partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def records_to_csv(records: Iterable[TrafficRecord]) -> str:
    """Render records in the interchange CSV format (coordinates at 2 decimals)."""
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.region_id,
                f"{r.latitude:.2f}",
                f"{r.longitude:.2f}",
                r.date.isoformat(),
                r.hour,
                r.day_of_week.value,
                "true" if r.is_holiday else "false",
                r.weather.value,
                f"{r.temperature_c:.1f}",
                f"{r.speed_kmh:.1f}",
                r.vehicle_count,
            ]
        )
    return buffer.getvalue()


def write_csv(records: Iterable[TrafficRecord], path: Path | str) -> None:
    atomic_write_text(path, records_to_csv(records))


def _synthesize_anon_id(row_index: int, region_id: str, date_text: str, hour: int) -> str:
    # Datasets published without identifiers still need opaque per-row ids;
    # a fixed tag keeps re-ingestion deterministic.
    digest = hashlib.sha256()
    digest.update(b"fairtraffic-csv-ingest")
    digest.update(f"{row_index}|{region_id}|{date_text}|{hour}".encode("utf-8"))
    return digest.hexdigest()


def load_csv(path: Path | str) -> list[TrafficRecord]:
    """Read the interchange CSV. Unknown columns are ignored with a warning.

    Rows without an anon_id column get a deterministic synthesized identifier.
    """
    path = Path(path)
    records: list[TrafficRecord] = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}")
        unknown = [c for c in header if c not in CSV_COLUMNS and c not in _OPTIONAL_COLUMNS]
        if unknown:
            logger.warning("%s: ignoring unknown columns %s", path, unknown)
        for i, row in enumerate(reader):
            date_text = row["date"]
            hour = int(row["hour"])
            anon_id = row.get("anon_id") or _synthesize_anon_id(i, row["region_id"], date_text, hour)
            records.append(
                TrafficRecord(
                    anon_id=anon_id,
                    region_id=row["region_id"],
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    hour=hour,
                    date=Date.fromisoformat(date_text),
                    speed_kmh=float(row["speed_kmh"]),
                    vehicle_count=int(row["vehicle_count"]),
                    weather=Weather(row["weather"]),
                    temperature_c=float(row["temperature_c"]),
                    day_of_week=DayOfWeek(row["day_of_week"]),
                    is_holiday=row["is_holiday"].strip().lower() in ("true", "1", "yes"),
                )
            )
    return records


def round_half_up(value: float) -> int:
    """Round to nearest integer with ties away from zero, for count arithmetic."""
    return int(math.floor(value + 0.5)) if value >= 0 else -int(math.floor(-value + 0.5))
