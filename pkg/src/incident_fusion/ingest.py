"""Parsing and validation of incident reports and detector readings."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd

from .errors import SchemaError

logger = logging.getLogger(__name__)

CsvSource = Union[str, PathLike, io.IOBase, pd.DataFrame]

SLOT_MINUTES = 5
SLOTS_PER_DAY = 288
INCIDENT_COLUMNS = ("id", "lat", "lon", "start", "end", "severity", "description")
STATION_COLUMNS = ("station_id", "timestamp", "speed", "flow")
SEVERITY_LEVELS = (1, 2, 3, 4)
_EPOCH = pd.Timestamp("1970-01-01", tz="UTC")


@dataclass(frozen=True)
class IncidentRecord:
    """One validated incident report.

    ``baseline`` holds the structured features as ``(name, value)`` pairs in
    schema order, categorical columns already one-hot expanded.
    """

    id: str
    latitude: float
    longitude: float
    start_time: pd.Timestamp
    end_time: pd.Timestamp
    severity: int
    description: str
    baseline: tuple[tuple[str, float], ...] = ()

    @property
    def duration_min(self) -> int:
        return int((self.end_time - self.start_time) // pd.Timedelta(minutes=1))

    @property
    def start_slot(self) -> int:
        return timestamp_to_slot(self.start_time)

    @property
    def baseline_names(self) -> list[str]:
        return [name for name, _ in self.baseline]

    @property
    def baseline_values(self) -> np.ndarray:
        return np.array([value for _, value in self.baseline], dtype=np.float64)


@dataclass
class StationSeries:
    """Five-minute readings of one detector station.

    ``readings`` is a DataFrame indexed by integer slot number (minutes since
    the Unix epoch divided by 5) with ``speed`` and ``flow`` columns, sorted
    and unique.
    """

    station_id: str
    latitude: float
    longitude: float
    readings: pd.DataFrame

    @property
    def coverage(self) -> tuple[int, int]:
        if self.readings.empty:
            return (0, -1)
        return (int(self.readings.index[0]), int(self.readings.index[-1]))


@dataclass
class RejectionReport:
    """Rows dropped by a parser with the reason for each."""

    rows_in: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rows_rejected(self) -> int:
        return len(self.rejected)

    @property
    def rows_accepted(self) -> int:
        return self.rows_in - self.rows_rejected

    def add(self, row_number: int, reason: str) -> None:
        self.rejected.append((row_number, reason))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rejected, columns=["row_number", "reason"])

    def to_csv(self, path: Union[str, PathLike]) -> None:
        self.to_frame().sort_values("row_number", kind="stable").to_csv(path, index=False)

    def summary(self, what: str) -> str:
        return f"Rejected {self.rows_rejected} of {self.rows_in} {what} rows."


def timestamp_to_slot(ts: pd.Timestamp) -> int:
    """Floor a UTC timestamp to its 5-minute slot number."""
    minutes = (ts - _EPOCH) // pd.Timedelta(minutes=1)
    return int(minutes // SLOT_MINUTES)


def slot_to_timestamp(slot: int) -> pd.Timestamp:
    return _EPOCH + pd.Timedelta(minutes=int(slot) * SLOT_MINUTES)


def _read_frame(csv_source: CsvSource) -> pd.DataFrame:
    if isinstance(csv_source, pd.DataFrame):
        return csv_source.astype(str).copy()
    return pd.read_csv(csv_source, dtype=str, keep_default_na=False, encoding="utf-8")


def _parse_timestamp(text: str, tz: str) -> pd.Timestamp:
    ts = pd.Timestamp(text.strip())
    if pd.isna(ts):
        raise ValueError("empty timestamp")
    if ts.tzinfo is None:
        ts = ts.tz_localize(tz)
    return ts.tz_convert("UTC").floor("min")


def _one_hot_columns(frame: pd.DataFrame, categorical: Sequence[str]) -> dict[str, list[str]]:
    levels = {}
    for col in categorical:
        values = sorted({v.strip() for v in frame[col] if v.strip() != ""})
        levels[col] = values
    return levels


def parse_incidents(
    csv_source: CsvSource,
    baseline_columns: Sequence[str] | None = None,
    categorical_columns: Sequence[str] = (),
    tz: str = "UTC",
) -> tuple[list[IncidentRecord], RejectionReport]:
    """
    Parse an incident-report CSV into validated :class:`IncidentRecord` objects.

    Parameters
    ----------
    csv_source : path, file object or pd.DataFrame
        Comma-separated UTF-8 text with a header row. Required columns are
        ``id, lat, lon, start, end, severity, description``.
    baseline_columns : sequence of str, optional
        Ordered numeric baseline feature columns. ``None`` takes every
        non-required column in file order.
    categorical_columns : sequence of str, default ()
        Baseline columns to one-hot expand; each becomes ``<col>=<level>``
        columns with levels in sorted order. The first sorted level is the
        reference level and gets no column, so an intercept stays estimable.
    tz : str, default "UTC"
        Zone used for timestamps without an offset.

    Returns
    -------
    tuple of (list of IncidentRecord, RejectionReport)
        Accepted records in file order and the report of dropped rows.
        Data rows are numbered from 1.

    Raises
    ------
    SchemaError
        If a required or declared baseline column is missing.

    Examples
    --------
    >>> import pandas as pd
    >>> df = pd.DataFrame({
    ...     "id": ["A-1"], "lat": ["37.77"], "lon": ["-122.41"],
    ...     "start": ["2019-03-01T07:10"], "end": ["2019-03-01T07:41"],
    ...     "severity": ["2"],
    ...     "description": ["Accident on I-280 Northbound at Exit 57 King St."],
    ... })
    >>> records, report = parse_incidents(df)
    >>> records[0].duration_min
    31
    """
    frame = _read_frame(csv_source)
    for col in INCIDENT_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(col, "incident CSV")

    if baseline_columns is None:
        baseline_columns = [c for c in frame.columns if c not in INCIDENT_COLUMNS]
    for col in list(baseline_columns) + list(categorical_columns):
        if col not in frame.columns:
            raise SchemaError(col, "incident CSV")

    levels = _one_hot_columns(frame, categorical_columns)
    report = RejectionReport(rows_in=len(frame))
    records: list[IncidentRecord] = []
    seen_ids: set[str] = set()

    for row_number, row in enumerate(frame.to_dict("records"), start=1):
        reason = None
        try:
            start = _parse_timestamp(row["start"], tz)
            end = _parse_timestamp(row["end"], tz)
        except (ValueError, TypeError):
            reason = "unparseable timestamp"
        if reason is None:
            reason = _check_incident_row(row, start, end)
        if reason is None and row["id"].strip() in seen_ids:
            reason = "duplicate id"
        if reason is None:
            try:
                baseline = _baseline_pairs(row, baseline_columns, categorical_columns, levels)
            except ValueError:
                reason = "non-numeric baseline value"
        if reason is not None:
            report.add(row_number, reason)
            logger.debug("incident row %d rejected: %s", row_number, reason)
            continue

        records.append(
            IncidentRecord(
                id=row["id"].strip(),
                latitude=float(row["lat"]),
                longitude=float(row["lon"]),
                start_time=start,
                end_time=end,
                severity=int(float(row["severity"])),
                description=row["description"],
                baseline=baseline,
            )
        )
        seen_ids.add(records[-1].id)

    logger.info("parsed %d incidents, rejected %d", len(records), report.rows_rejected)
    return records, report


def _check_incident_row(row: dict, start: pd.Timestamp, end: pd.Timestamp) -> str | None:
    if not row["id"].strip():
        return "missing id"
    try:
        lat, lon = float(row["lat"]), float(row["lon"])
    except ValueError:
        return "unparseable coordinates"
    if not (abs(lat) <= 90 and abs(lon) <= 180):
        return "coordinates out of range"
    try:
        severity = float(row["severity"])
    except ValueError:
        return "unparseable severity"
    if severity not in SEVERITY_LEVELS:
        return "severity out of range"
    if not row["description"].strip():
        return "empty description"
    if end <= start:
        return "end not after start"
    if (end - start) < pd.Timedelta(minutes=1):
        return "duration below one minute"
    return None


def _baseline_pairs(
    row: dict,
    baseline_columns: Sequence[str],
    categorical_columns: Sequence[str],
    levels: dict[str, list[str]],
) -> tuple[tuple[str, float], ...]:
    pairs = []
    for col in baseline_columns:
        if col in categorical_columns:
            continue
        value = float(row[col])
        if not np.isfinite(value):
            raise ValueError(col)
        pairs.append((col, value))
    for col in categorical_columns:
        current = row[col].strip()
        for level in levels[col][1:]:
            pairs.append((f"{col}={level}", 1.0 if current == level else 0.0))
    return tuple(pairs)


def write_incidents(records: Iterable[IncidentRecord], path: Union[str, PathLike, io.IOBase]) -> None:
    """Write records back to the incident CSV layout (UTC offsets, expanded baseline)."""
    rows = []
    for rec in records:
        row = {
            "id": rec.id,
            "lat": repr(rec.latitude),
            "lon": repr(rec.longitude),
            "start": rec.start_time.strftime("%Y-%m-%dT%H:%M+00:00"),
            "end": rec.end_time.strftime("%Y-%m-%dT%H:%M+00:00"),
            "severity": str(rec.severity),
            "description": rec.description,
        }
        for name, value in rec.baseline:
            row[name] = repr(float(value))
        rows.append(row)
    frame = pd.DataFrame(rows, columns=_union_columns(rows, INCIDENT_COLUMNS))
    frame.to_csv(path, index=False, quoting=1)


def _union_columns(rows: list[dict], leading: Sequence[str]) -> list[str]:
    columns = list(leading)
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def incidents_to_frame(records: Sequence[IncidentRecord]) -> pd.DataFrame:
    """Tabular view of incidents: one row per id, baseline columns expanded."""
    rows = []
    for rec in records:
        row = {
            "id": rec.id,
            "latitude": rec.latitude,
            "longitude": rec.longitude,
            "start_time": rec.start_time,
            "end_time": rec.end_time,
            "severity": rec.severity,
            "description": rec.description,
            "duration_min": rec.duration_min,
        }
        row.update({f"baseline:{name}": value for name, value in rec.baseline})
        rows.append(row)
    return pd.DataFrame(rows)


def parse_station_readings(
    csv_source: CsvSource,
    metadata: CsvSource | None = None,
    tz: str = "UTC",
) -> tuple[list[StationSeries], RejectionReport]:
    """
    Parse detector readings into one :class:`StationSeries` per station.

    Parameters
    ----------
    csv_source : path, file object or pd.DataFrame
        Rows of ``station_id,timestamp,speed,flow``; optional ``latitude`` and
        ``longitude`` columns locate the station.
    metadata : path, file object or pd.DataFrame, optional
        ``station_id,latitude,longitude`` table for readings files without
        coordinates.
    tz : str, default "UTC"
        Zone used for timestamps without an offset.

    Returns
    -------
    tuple of (list of StationSeries, RejectionReport)
        Stations sorted by id, readings sorted by slot.

    Raises
    ------
    SchemaError
        If one of the four reading columns is missing.

    Notes
    -----
    Timestamps are floored to their 5-minute slot. A second reading in an
    already filled slot is rejected as a duplicate, as are negative or
    non-numeric speed/flow values and readings of stations with no known
    coordinates.
    """
    frame = _read_frame(csv_source)
    for col in STATION_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(col, "station CSV")

    coords: dict[str, tuple[float, float]] = {}
    if metadata is not None:
        meta = _read_frame(metadata)
        for col in ("station_id", "latitude", "longitude"):
            if col not in meta.columns:
                raise SchemaError(col, "station metadata CSV")
        for row in meta.to_dict("records"):
            coords[row["station_id"].strip()] = (float(row["latitude"]), float(row["longitude"]))
    has_inline = "latitude" in frame.columns and "longitude" in frame.columns

    report = RejectionReport(rows_in=len(frame))
    seen: set[tuple[str, int]] = set()
    accepted: dict[str, list[tuple[int, float, float]]] = {}
    row_numbers: dict[str, list[int]] = {}

    for row_number, row in enumerate(frame.to_dict("records"), start=1):
        station_id = row["station_id"].strip()
        try:
            slot = timestamp_to_slot(_parse_timestamp(row["timestamp"], tz))
        except (ValueError, TypeError):
            report.add(row_number, "unparseable timestamp")
            continue
        try:
            speed, flow = float(row["speed"]), float(row["flow"])
        except ValueError:
            report.add(row_number, "non-numeric reading")
            continue
        if not (np.isfinite(speed) and np.isfinite(flow)):
            report.add(row_number, "non-numeric reading")
            continue
        if speed < 0:
            report.add(row_number, "negative speed")
            continue
        if flow < 0:
            report.add(row_number, "negative flow")
            continue
        if (station_id, slot) in seen:
            report.add(row_number, "duplicate slot")
            continue
        if has_inline and station_id not in coords and row["latitude"].strip():
            coords[station_id] = (float(row["latitude"]), float(row["longitude"]))
        seen.add((station_id, slot))
        accepted.setdefault(station_id, []).append((slot, speed, flow))
        row_numbers.setdefault(station_id, []).append(row_number)

    stations = []
    for station_id in sorted(accepted):
        if station_id not in coords:
            for row_number in row_numbers[station_id]:
                report.add(row_number, "station has no coordinates")
            continue
        readings = (
            pd.DataFrame(accepted[station_id], columns=["slot", "speed", "flow"])
            .set_index("slot")
            .sort_index()
        )
        lat, lon = coords[station_id]
        stations.append(StationSeries(station_id, lat, lon, readings))

    logger.info(
        "parsed %d stations from %d rows, rejected %d",
        len(stations), report.rows_in, report.rows_rejected,
    )
    return stations, report


def write_station_readings(
    stations: Iterable[StationSeries],
    path: Union[str, PathLike, io.IOBase],
    metadata_path: Union[str, PathLike, io.IOBase, None] = None,
) -> None:
    """Write readings as ``station_id,timestamp,speed,flow`` plus an optional metadata file."""
    frames, meta = [], []
    for st in stations:
        ts = [slot_to_timestamp(s).strftime("%Y-%m-%dT%H:%M+00:00") for s in st.readings.index]
        frames.append(
            pd.DataFrame(
                {
                    "station_id": st.station_id,
                    "timestamp": ts,
                    "speed": st.readings["speed"].to_numpy(),
                    "flow": st.readings["flow"].to_numpy(),
                }
            )
        )
        meta.append({"station_id": st.station_id, "latitude": st.latitude, "longitude": st.longitude})
    out = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(STATION_COLUMNS))
    out.to_csv(path, index=False, float_format="%.6f")
    if metadata_path is not None:
        pd.DataFrame(meta, columns=["station_id", "latitude", "longitude"]).to_csv(
            metadata_path, index=False, float_format="%.8f"
        )


def validate_window(series: StationSeries, end_slot: int, n_slots: int) -> bool:
    """
    Check that every slot of a window is present.

    Parameters
    ----------
    series : StationSeries
    end_slot : int
        Last slot of the window (inclusive).
    n_slots : int
        Window length, must be positive.

    Returns
    -------
    bool
        True iff slots ``end_slot - n_slots + 1 .. end_slot`` all have readings.
    """
    if n_slots <= 0:
        raise ValueError("n_slots must be positive")
    first, last = series.coverage
    start_slot = end_slot - n_slots + 1
    if start_slot < first or end_slot > last:
        return False
    index = series.readings.index
    lo = index.searchsorted(start_slot, side="left")
    hi = index.searchsorted(end_slot, side="right")
    return (hi - lo) == n_slots


def first_missing_slot(series: StationSeries, end_slot: int, n_slots: int) -> int | None:
    """Oldest slot of the window without a reading, or None when complete."""
    wanted = np.arange(end_slot - n_slots + 1, end_slot + 1)
    present = np.isin(wanted, series.readings.index.to_numpy())
    if present.all():
        return None
    return int(wanted[np.argmin(present)])
