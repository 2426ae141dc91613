import json

import numpy as np
import pandas as pd
import pytest

from incident_fusion.errors import ConfigurationError, DimensionError, ExtractionError, MissingArtifactError
from incident_fusion.ingest import SLOTS_PER_DAY, IncidentRecord, StationSeries, slot_to_timestamp
from incident_fusion.matching import (
    CHANNELS,
    DaySeries288,
    GeoPoint,
    derive_and_normalize,
    extract_window,
    haversine,
    match_all,
    match_incident,
    read_matched,
    read_normalization,
    write_matched,
)
from incident_fusion.synthetic import METERS_PER_DEGREE

START_SLOT = 5_000_000
WEEK = 7 * SLOTS_PER_DAY


def _incident(id="I-1", lat=37.7, lon=-122.4, start_slot=START_SLOT, duration=30):
    start = slot_to_timestamp(start_slot)
    return IncidentRecord(id, lat, lon, start, start + pd.Timedelta(minutes=duration), 2, "Accident.")


def _station(station_id, north_m=0.0, first=START_SLOT - WEEK - 2 * SLOTS_PER_DAY, last=START_SLOT - 1, drop=()):
    slots = [s for s in range(first, last + 1) if s not in set(drop)]
    readings = pd.DataFrame(
        {"speed": np.asarray(slots, dtype=float) % 97 + 1, "flow": np.full(len(slots), 40.0)},
        index=pd.Index(slots, name="slot"),
    )
    return StationSeries(station_id, 37.7 + north_m / METERS_PER_DEGREE, -122.4, readings)


def test_haversine_one_degree_and_symmetry():
    """One degree of latitude on the 6,371 km sphere is about 111.195 km."""
    a, b = GeoPoint(0.0, 0.0), GeoPoint(1.0, 0.0)
    assert haversine(a, b) == pytest.approx(111_194.93, abs=0.01)
    assert haversine(b, a) == pytest.approx(haversine(a, b))
    assert haversine(a, a) == 0.0
    p, q = GeoPoint(37.77, -122.41), GeoPoint(37.33, -121.89)
    assert haversine(p, q) == pytest.approx(haversine(q, p), rel=1e-12)


def test_geopoint_rejects_bad_coordinates():
    with pytest.raises(ValueError, match="invalid coordinates"):
        GeoPoint(91.0, 0.0)


def test_station_outside_radius_is_not_matched():
    assert match_incident(_incident(), [_station("S1", north_m=600.0)]) is None


def test_nearest_complete_station_wins():
    """A nearer station with a gap loses to a complete one further away."""
    near = _station("S-near", north_m=100.0, drop=[START_SLOT - 10])
    far = _station("S-far", north_m=300.0)
    station_id, distance = match_incident(_incident(), [near, far])
    assert station_id == "S-far"
    assert distance == pytest.approx(300.0, abs=0.5)


def test_equidistant_stations_break_ties_by_id():
    hit = match_incident(_incident(), [_station("S-b", 200.0), _station("S-a", 200.0)])
    assert hit[0] == "S-a"


def test_no_stations_is_a_configuration_error():
    with pytest.raises(ConfigurationError, match="no detector stations"):
        match_all([_incident()], [])


def test_extract_window_ends_before_start():
    """The window covers the 288 slots before the start slot, oldest first."""
    st = _station("S1")
    speed, flow = extract_window(st, _incident().start_time)
    expected = np.arange(START_SLOT - SLOTS_PER_DAY, START_SLOT, dtype=float) % 97 + 1
    np.testing.assert_array_equal(speed.values, expected)
    np.testing.assert_array_equal(flow.values, np.full(SLOTS_PER_DAY, 40.0))
    week, _ = extract_window(st, _incident().start_time, offset_days=7)
    np.testing.assert_array_equal(week.values, np.arange(START_SLOT - WEEK - SLOTS_PER_DAY, START_SLOT - WEEK) % 97 + 1)


def test_extract_window_names_oldest_missing_slot():
    st = _station("S1", drop=[START_SLOT - 5, START_SLOT - 100])
    with pytest.raises(ExtractionError) as info:
        extract_window(st, _incident().start_time)
    assert info.value.station_id == "S1"
    assert info.value.missing_slot == START_SLOT - 100


def test_derive_and_normalize_examples():
    """Speed 50 against maximum 100 becomes 0.5; identical days give zero differences."""
    speed = DaySeries288(np.full(SLOTS_PER_DAY, 50.0), "speed")
    flow = DaySeries288(np.linspace(0, 80, SLOTS_PER_DAY), "flow")
    block = derive_and_normalize(speed, flow, speed, flow, 100.0, 80.0)
    assert sorted(block) == sorted(CHANNELS)
    np.testing.assert_allclose(block["speed"].values, 0.5)
    assert block["flow"].values.max() == 1.0
    np.testing.assert_array_equal(block["sd"].values, np.zeros(SLOTS_PER_DAY))
    np.testing.assert_array_equal(block["fd"].values, np.zeros(SLOTS_PER_DAY))


def test_derive_and_normalize_rejects_zero_maximum():
    s = DaySeries288(np.ones(SLOTS_PER_DAY), "speed")
    with pytest.raises(ConfigurationError):
        derive_and_normalize(s, s, s, s, 0.0, 1.0)


def test_maximum_below_observed_value_is_a_configuration_error():
    """A configured maximum smaller than a reading is named instead of clipped."""
    speed = DaySeries288(np.full(SLOTS_PER_DAY, 110.0), "speed")
    flow = DaySeries288(np.full(SLOTS_PER_DAY, 40.0), "flow")
    with pytest.raises(ConfigurationError, match="max_speed"):
        derive_and_normalize(speed, flow, speed, flow, 100.0, 80.0)
    with pytest.raises(ConfigurationError, match="max_flow"):
        derive_and_normalize(speed, flow, speed, flow, 200.0, 20.0)
    with pytest.raises(ConfigurationError, match="max_speed"):
        match_all([_incident()], [_station("S1", north_m=50.0)], max_speed=50.0, max_flow=100.0)


def test_day_series_shape_is_checked():
    with pytest.raises(DimensionError):
        DaySeries288(np.ones(10), "speed")


def test_match_all_radius_zero_matches_nothing():
    matched, summary = match_all([_incident()], [_station("S1", north_m=50.0)], radius_m=0.0)
    assert matched == []
    assert summary.line() == "matched 0 of 1 incidents"


def test_match_all_normalizes_by_dataset_maxima():
    incidents = [_incident("I-2"), _incident("I-1", start_slot=START_SLOT - 3)]
    matched, summary = match_all(incidents, [_station("S1", north_m=50.0)])
    assert [m.incident.id for m in matched] == ["I-1", "I-2"]
    assert summary.max_speed == 97.0
    assert summary.max_flow == 40.0
    for m in matched:
        for ch in CHANNELS:
            values = m.series(ch).values
            assert values.shape == (SLOTS_PER_DAY,)
            assert values.max() <= 1.0
            assert values.min() >= (-1.0 if ch in ("sd", "fd") else 0.0)


def test_matched_cache_round_trip(tmp_path):
    incidents = [_incident()]
    matched, summary = match_all(incidents, [_station("S1", north_m=50.0)])
    path = tmp_path / "matched.csv"
    write_matched(matched, path, summary)
    again = read_matched(path, incidents)
    assert again[0].station_id == "S1"
    assert again[0].distance_m == pytest.approx(matched[0].distance_m)
    for ch in CHANNELS:
        np.testing.assert_allclose(again[0].series(ch).values, matched[0].series(ch).values, rtol=1e-9)
    assert read_normalization(path)["matched"] == 1
    assert json.loads(path.with_suffix(".json").read_text())["max_flow"] == 40.0


def test_read_matched_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError, match="incident-fusion match"):
        read_matched(tmp_path / "nope.csv", [])
