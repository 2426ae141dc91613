"""Deterministic synthetic incidents and detector readings for desk-scale runs."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigurationError
from .ingest import (
    SLOT_MINUTES,
    SLOTS_PER_DAY,
    IncidentRecord,
    StationSeries,
    slot_to_timestamp,
    timestamp_to_slot,
)

logger = logging.getLogger(__name__)

METERS_PER_DEGREE = 6_371_000.0 * math.pi / 180.0
# Stations sit on a grid this far apart, so an incident within 400 m of its
# own station is always more than 500 m from every other one.
STATION_SPACING_DEG = 0.02
INCIDENT_SPACING_DAYS = 10
FIRST_INCIDENT_DAY = 8

ROADS = (
    ("I-280", ("Northbound", "Southbound"), ("Exit 52 San Jose Ave", "Exit 55 Cesar Chavez", "Exit 57 King St", "Ocean Ave")),
    ("US-101", ("Northbound", "Southbound"), ("Exits 429B 429C Bay Shore Blvd", "Exit 438 CA-1", "Exit 439 Transit Transfer Facility")),
    ("I-80", ("Eastbound", "Westbound"), ("Exits 1 1C / Bryant St / 8th St", "Exits 2B 2C Harrison St")),
)

# wording, lanes blocked, typical severity
BLOCKAGES = (
    ("Accident on {road} {direction} at {place}.", 0, 2),
    ("Right hand shoulder blocked due to accident on {road} {direction} at {place}.", 0, 2),
    ("Lane blocked on exit ramp due to accident on {road} {direction} at {place}.", 1, 3),
    ("Lane blocked due to accident on {road} {direction} at {place}.", 1, 3),
    ("Second lane blocked due to accident on {road} {direction} at {place}.", 1, 3),
    ("Two lanes blocked due to accident on {road} {direction} at {place}.", 2, 4),
)
WEATHER = ("clear", "fog", "rain")


@dataclass(frozen=True)
class DurationLaw:
    """Minutes = depth_coef * depth (km/h) + length_coef * length (min) + intercept."""

    depth_coef: float = 0.8
    length_coef: float = 0.5
    intercept: float = 0.0

    def minutes(self, depth: float, length: float) -> float:
        return self.depth_coef * depth + self.length_coef * length + self.intercept


@dataclass(frozen=True)
class NoiseLevels:
    speed: float = 2.0
    flow: float = 5.0
    duration: float = 0.0


@dataclass(frozen=True)
class SyntheticConfig:
    """
    Shape of a synthetic dataset.

    Each incident gets a speed drop of a random depth (km/h) and length
    (minutes) that ends at the incident start and then persists until the
    incident ends, for at most one day, so the 24-hour window before the
    start carries both.
    Its duration follows ``duration_law`` plus Gaussian noise.
    """

    n_incidents: int = 100
    n_stations: int = 10
    seed: int = 1
    drop_depth_range: tuple[float, float] = (20.0, 60.0)
    drop_length_range: tuple[float, float] = (10.0, 120.0)
    duration_law: DurationLaw = field(default_factory=DurationLaw)
    noise_sd: NoiseLevels = field(default_factory=NoiseLevels)
    free_speed: float = 100.0
    origin: str = "2019-03-01T00:00+00:00"

    def __post_init__(self):
        if self.n_incidents <= 0 or self.n_stations <= 0:
            raise ConfigurationError("n_incidents and n_stations must be positive")
        noise = self.noise_sd
        if min(noise.speed, noise.flow, noise.duration) < 0:
            raise ConfigurationError("noise_sd must be non-negative")
        lo, hi = self.drop_depth_range
        if lo < 0 or hi < lo:
            raise ConfigurationError("drop_depth_range must be an ordered non-negative pair")
        lo, hi = self.drop_length_range
        if lo < SLOT_MINUTES or hi < lo:
            raise ConfigurationError("drop_length_range must start at 5 minutes or more")


@dataclass(frozen=True)
class PlantedDrop:
    """Ground truth of one generated incident, kept for tests and plots."""

    incident_id: str
    station_id: str
    depth: float
    length_min: float
    distance_m: float


def _daily_profile(slots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hours = (slots % SLOTS_PER_DAY) * SLOT_MINUTES / 60.0
    rush = np.exp(-((hours - 8.0) ** 2) / 2.0) + np.exp(-((hours - 17.5) ** 2) / 2.5)
    speed_dip = 15.0 * rush
    flow = 40.0 + 45.0 * np.clip(np.sin(np.pi * (hours - 5.0) / 17.0), 0.0, None) + 40.0 * rush
    return speed_dip, flow


def _offset_point(lat: float, lon: float, distance_m: float, bearing: float) -> tuple[float, float]:
    dlat = distance_m * math.cos(bearing) / METERS_PER_DEGREE
    dlon = distance_m * math.sin(bearing) / (METERS_PER_DEGREE * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def generate_synthetic(
    config: SyntheticConfig,
    with_truth: bool = False,
):
    """
    Generate incidents and station readings that obey a known duration law.

    Parameters
    ----------
    config : SyntheticConfig
    with_truth : bool, default False
        Also return the list of :class:`PlantedDrop` ground truths.

    Returns
    -------
    tuple
        ``(incidents, stations)`` or ``(incidents, stations, truth)``.
        Incidents are ordered by id, stations by station id.

    Notes
    -----
    Incident ``i`` goes to station ``i % n_stations`` at 20-400 m. Incidents
    sharing a station are ten days apart and a drop lasts at most one day past
    its incident's start, so neither the day-before window nor the
    week-before window of one incident contains another's drop.
    The same seed always yields identical output.
    """
    if not isinstance(config, SyntheticConfig):
        raise TypeError("config must be a SyntheticConfig")

    rng = np.random.default_rng(config.seed)
    origin_slot = timestamp_to_slot(pd.Timestamp(config.origin).tz_convert("UTC"))
    n_st = config.n_stations
    per_station = math.ceil(config.n_incidents / n_st)
    n_days = FIRST_INCIDENT_DAY + INCIDENT_SPACING_DAYS * per_station + 1
    n_slots = n_days * SLOTS_PER_DAY
    slots = origin_slot + np.arange(n_slots)
    speed_dip, base_flow = _daily_profile(slots)

    cols = math.ceil(math.sqrt(n_st))
    station_pos = []
    speeds, flows = [], []
    for j in range(n_st):
        lat = 37.70 + STATION_SPACING_DEG * (j // cols)
        lon = -122.50 + STATION_SPACING_DEG * (j % cols)
        station_pos.append((lat, lon))
        speeds.append(config.free_speed - speed_dip + rng.normal(0.0, config.noise_sd.speed, n_slots))
        flows.append(base_flow * rng.uniform(0.8, 1.2) + rng.normal(0.0, config.noise_sd.flow, n_slots))

    incidents, truth = [], []
    for i in range(config.n_incidents):
        j, k = i % n_st, i // n_st
        station_id = f"VDS-{j + 1:03d}"
        incident_id = f"S-{i + 1:05d}"

        tod_slot = int(rng.integers(0, SLOTS_PER_DAY))
        minute_jitter = int(rng.integers(0, SLOT_MINUTES))
        start_index = (FIRST_INCIDENT_DAY + INCIDENT_SPACING_DAYS * k) * SLOTS_PER_DAY + tod_slot
        depth = float(rng.uniform(*config.drop_depth_range))
        length_slots = int(rng.integers(
            int(config.drop_length_range[0] // SLOT_MINUTES),
            int(config.drop_length_range[1] // SLOT_MINUTES) + 1,
        ))
        length_min = float(length_slots * SLOT_MINUTES)
        raw = config.duration_law.minutes(depth, length_min) + rng.normal(0.0, config.noise_sd.duration)
        duration = max(1, int(round(raw)))

        drop_end = min(n_slots, start_index + min(math.ceil(duration / SLOT_MINUTES), SLOTS_PER_DAY))
        speeds[j][start_index - length_slots:drop_end] -= depth

        template, lanes, severity = BLOCKAGES[int(rng.integers(0, len(BLOCKAGES)))]
        if rng.random() < 0.15:
            severity = int(np.clip(severity + rng.choice([-1, 1]), 1, 4))
        road, directions, places = ROADS[int(rng.integers(0, len(ROADS)))]
        description = template.format(
            road=road,
            direction=directions[int(rng.integers(0, len(directions)))],
            place=places[int(rng.integers(0, len(places)))],
        )
        weather = WEATHER[int(rng.integers(0, len(WEATHER)))]

        distance = float(rng.uniform(20.0, 400.0))
        lat, lon = _offset_point(*station_pos[j], distance, float(rng.uniform(0.0, 2 * math.pi)))
        start = slot_to_timestamp(origin_slot + start_index) + pd.Timedelta(minutes=minute_jitter)
        end = start + pd.Timedelta(minutes=duration)
        baseline = (
            ("lanes_blocked", float(lanes)),
            ("hour", float(start.hour)),
        ) + tuple((f"weather={w}", 1.0 if w == weather else 0.0) for w in WEATHER[1:])

        incidents.append(
            IncidentRecord(
                id=incident_id,
                latitude=round(lat, 7),
                longitude=round(lon, 7),
                start_time=start,
                end_time=end,
                severity=severity,
                description=description,
                baseline=baseline,
            )
        )
        truth.append(PlantedDrop(incident_id, station_id, depth, length_min, distance))

    stations = []
    for j in range(n_st):
        readings = pd.DataFrame(
            {
                "speed": np.round(np.clip(speeds[j], 5.0, None), 3),
                "flow": np.round(np.clip(flows[j], 0.0, None), 3),
            },
            index=pd.Index(slots, name="slot"),
        )
        lat, lon = station_pos[j]
        stations.append(StationSeries(f"VDS-{j + 1:03d}", lat, lon, readings))

    logger.info(
        "generated %d incidents over %d stations (%d days of readings)",
        len(incidents), n_st, n_days,
    )
    if with_truth:
        return incidents, stations, truth
    return incidents, stations
