"""Incident-to-detector matching and extraction of the six day-long series."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DimensionError, ExtractionError, MissingArtifactError
from .ingest import (
    SLOTS_PER_DAY,
    IncidentRecord,
    StationSeries,
    first_missing_slot,
    timestamp_to_slot,
    validate_window,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_RADIUS_M = 500.0
WEEK_OFFSET_DAYS = 7
CHANNELS = ("speed", "flow", "speed7", "flow7", "sd", "fd")
# Source labels used by the encoders and the grid, keyed by channel.
SOURCE_NAMES = {
    "speed": "Speed",
    "flow": "Flow",
    "speed7": "Speed7",
    "flow7": "Flow7",
    "sd": "SD",
    "fd": "FD",
}


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError(f"invalid coordinates ({self.latitude}, {self.longitude})")


@dataclass(frozen=True)
class DaySeries288:
    """288 five-minute values of one channel, oldest first."""

    values: np.ndarray
    channel: str
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (SLOTS_PER_DAY,):
            raise DimensionError(f"day series must hold {SLOTS_PER_DAY} values, got {values.shape}")
        if self.channel not in ("speed", "flow", "difference"):
            raise ValueError(f"unknown channel '{self.channel}'")
        object.__setattr__(self, "values", values)
        if self.normalized:
            lo = -1.0 if self.channel == "difference" else 0.0
            if values.min() < lo - 1e-12 or values.max() > 1.0 + 1e-12:
                raise ValueError(f"normalized {self.channel} series out of range")


@dataclass(frozen=True)
class MatchedIncident:
    incident: IncidentRecord
    station_id: str
    distance_m: float
    speed: DaySeries288
    flow: DaySeries288
    speed7: DaySeries288
    flow7: DaySeries288
    sd: DaySeries288
    fd: DaySeries288

    def series(self, channel: str) -> DaySeries288:
        if channel not in CHANNELS:
            raise KeyError(channel)
        return getattr(self, channel)


@dataclass(frozen=True)
class MatchSummary:
    matched: int
    total: int
    max_speed: float
    max_flow: float
    radius_m: float

    def line(self) -> str:
        return f"matched {self.matched} of {self.total} incidents"


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """
    Great-circle distance in metres on a sphere of radius 6,371,000 m.

    Examples
    --------
    >>> round(haversine(GeoPoint(0.0, 0.0), GeoPoint(1.0, 0.0)), 1)
    111194.9
    """
    lat1, lon1, lat2, lon2 = map(math.radians, (a.latitude, a.longitude, b.latitude, b.longitude))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _window_end(incident_start: pd.Timestamp, offset_days: int) -> int:
    return timestamp_to_slot(incident_start) - 1 - offset_days * SLOTS_PER_DAY


def _windows_complete(station: StationSeries, incident: IncidentRecord) -> bool:
    return all(
        validate_window(station, _window_end(incident.start_time, offset), SLOTS_PER_DAY)
        for offset in (0, WEEK_OFFSET_DAYS)
    )


def match_incident(
    incident: IncidentRecord,
    stations: Sequence[StationSeries],
    radius_m: float = DEFAULT_RADIUS_M,
) -> tuple[str, float] | None:
    """
    Nearest station within ``radius_m`` whose four raw windows are complete.

    Equidistant candidates are ordered by station id. Returns
    ``(station_id, distance_m)`` or ``None``.
    """
    if not stations:
        raise ConfigurationError("no detector stations to match against")
    here = GeoPoint(incident.latitude, incident.longitude)
    candidates = []
    for st in stations:
        d = haversine(here, GeoPoint(st.latitude, st.longitude))
        if d <= radius_m:
            candidates.append((d, st.station_id, st))
    for d, station_id, st in sorted(candidates, key=lambda c: (c[0], c[1])):
        if _windows_complete(st, incident):
            return station_id, d
        logger.debug("incident %s: station %s at %.0f m has incomplete data", incident.id, station_id, d)
    return None


def extract_window(
    series: StationSeries, incident_start: pd.Timestamp, offset_days: int = 0
) -> tuple[DaySeries288, DaySeries288]:
    """
    Speed and flow for the 288 slots before the incident start slot.

    The window ends at the slot strictly before the start slot, shifted back
    ``offset_days`` whole days, and is ordered oldest to newest.

    Raises
    ------
    ExtractionError
        If a slot of the window has no reading; names the oldest missing slot.
    """
    end_slot = _window_end(incident_start, offset_days)
    missing = first_missing_slot(series, end_slot, SLOTS_PER_DAY)
    if missing is not None:
        raise ExtractionError(series.station_id, missing)
    window = series.readings.loc[end_slot - SLOTS_PER_DAY + 1 : end_slot]
    return (
        DaySeries288(window["speed"].to_numpy(), "speed"),
        DaySeries288(window["flow"].to_numpy(), "flow"),
    )


def derive_and_normalize(
    speed: DaySeries288,
    flow: DaySeries288,
    speed7: DaySeries288,
    flow7: DaySeries288,
    max_speed: float,
    max_flow: float,
) -> dict[str, DaySeries288]:
    """
    Scale the four raw windows by dataset maxima and add the two differences.

    Returns
    -------
    dict
        Keys ``speed, flow, speed7, flow7, sd, fd``; ``sd = speed - speed7``
        and ``fd = flow - flow7`` taken after normalisation.

    Raises
    ------
    ConfigurationError
        If either maximum is not positive or is below an observed
        value of its channel.
    """
    if not (max_speed > 0 and max_flow > 0):
        raise ConfigurationError("max_speed and max_flow must be positive")
    for name, limit, windows in (("max_speed", max_speed, (speed, speed7)), ("max_flow", max_flow, (flow, flow7))):
        observed = max(float(w.values.max()) for w in windows)
        if observed > limit:
            raise ConfigurationError(f"{name} = {limit} is below the observed value {observed}")
    block = {
        "speed": DaySeries288(speed.values / max_speed, "speed", True),
        "flow": DaySeries288(flow.values / max_flow, "flow", True),
        "speed7": DaySeries288(speed7.values / max_speed, "speed", True),
        "flow7": DaySeries288(flow7.values / max_flow, "flow", True),
    }
    block["sd"] = DaySeries288(block["speed"].values - block["speed7"].values, "difference", True)
    block["fd"] = DaySeries288(block["flow"].values - block["flow7"].values, "difference", True)
    return block


def match_all(
    incidents: Sequence[IncidentRecord],
    stations: Sequence[StationSeries],
    radius_m: float = DEFAULT_RADIUS_M,
    max_speed: Union[float, str] = "auto",
    max_flow: Union[float, str] = "auto",
) -> tuple[list[MatchedIncident], MatchSummary]:
    """
    Match every incident and build its normalised six-channel block.

    With ``"auto"`` maxima are taken over all raw windows of matched
    incidents. Output is sorted by incident id.
    """
    if not stations:
        raise ConfigurationError("no detector stations to match against")
    by_id = {st.station_id: st for st in stations}
    raw = []
    for incident in sorted(incidents, key=lambda r: r.id):
        hit = match_incident(incident, stations, radius_m)
        if hit is None:
            continue
        station_id, distance = hit
        st = by_id[station_id]
        speed, flow = extract_window(st, incident.start_time, 0)
        speed7, flow7 = extract_window(st, incident.start_time, WEEK_OFFSET_DAYS)
        raw.append((incident, station_id, distance, speed, flow, speed7, flow7))

    if max_speed == "auto":
        max_speed = max((max(r[3].values.max(), r[5].values.max()) for r in raw), default=1.0)
    if max_flow == "auto":
        max_flow = max((max(r[4].values.max(), r[6].values.max()) for r in raw), default=1.0)
    max_speed, max_flow = float(max_speed), float(max_flow)

    matched = []
    for incident, station_id, distance, speed, flow, speed7, flow7 in raw:
        block = derive_and_normalize(speed, flow, speed7, flow7, max_speed, max_flow)
        matched.append(MatchedIncident(incident, station_id, distance, **block))

    summary = MatchSummary(len(matched), len(incidents), max_speed, max_flow, radius_m)
    logger.info("%s (radius %.0f m)", summary.line(), radius_m)
    return matched, summary


def _value_columns() -> list[str]:
    return [f"{ch}_{i:03d}" for ch in CHANNELS for i in range(SLOTS_PER_DAY)]


def write_matched(
    matched: Sequence[MatchedIncident],
    path: Union[str, PathLike],
    summary: MatchSummary | None = None,
) -> None:
    """Write the matched-features cache and its normalisation sidecar JSON."""
    path = Path(path)
    rows = []
    for m in matched:
        values = np.concatenate([m.series(ch).values for ch in CHANNELS])
        rows.append([m.incident.id, m.station_id, m.distance_m, *values])
    frame = pd.DataFrame(rows, columns=["incident_id", "station_id", "distance_m", *_value_columns()])
    frame.to_csv(path, index=False, float_format="%.10g")
    if summary is not None:
        sidecar = {
            "max_speed": summary.max_speed,
            "max_flow": summary.max_flow,
            "radius_m": summary.radius_m,
            "matched": summary.matched,
            "total": summary.total,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def read_matched(
    path: Union[str, PathLike], incidents: Sequence[IncidentRecord]
) -> list[MatchedIncident]:
    """Rebuild matched incidents from the cache, joining records by id."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "incident-fusion match")
    frame = pd.read_csv(path, dtype={"incident_id": str, "station_id": str})
    by_id = {rec.id: rec for rec in incidents}
    matched = []
    for row in frame.itertuples(index=False):
        incident = by_id.get(row.incident_id)
        if incident is None:
            raise MissingArtifactError(f"incident {row.incident_id} referenced by {path}")
        values = np.asarray(row[3:], dtype=np.float64).reshape(len(CHANNELS), SLOTS_PER_DAY)
        block = {
            ch: DaySeries288(values[i], "difference" if ch in ("sd", "fd") else ch.rstrip("7"), True)
            for i, ch in enumerate(CHANNELS)
        }
        matched.append(MatchedIncident(incident, row.station_id, float(row.distance_m), **block))
    return matched


def read_normalization(path: Union[str, PathLike]) -> dict:
    sidecar = Path(path).with_suffix(".json")
    if not sidecar.exists():
        raise MissingArtifactError(str(sidecar), "incident-fusion match")
    return json.loads(sidecar.read_text())


def plot_series(matched: MatchedIncident, path: Union[str, PathLike]) -> None:
    """Day plot of speed and flow before the incident against the week before."""
    from .plotting import series_figure

    hours = (np.arange(SLOTS_PER_DAY) - SLOTS_PER_DAY) / 12.0
    series_figure(
        hours,
        {
            "speed": (matched.speed.values, matched.speed7.values),
            "flow": (matched.flow.values, matched.flow7.values),
        },
        title=f"{matched.incident.id} at {matched.station_id}",
        path=path,
    )
