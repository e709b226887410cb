import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losfusion.errors import DataError
from losfusion.gnss_field import GnssStation
from losfusion.validation import (
    average_pixels_near_station,
    difference_stats,
    pixels_near,
    reference_to_station,
    validate_velocities,
)

LON0, LAT0 = -122.25, 37.6
# one metre of latitude in degrees
M = 1.0 / 111194.92664455874


def station(sid="S", lon=LON0, lat=LAT0, vx=0.0, vy=0.0, role="check"):
    return GnssStation(sid, lon, lat, vx, vy, 0.01, 0.01, role)


def test_pixels_near_radius():
    lat = LAT0 + np.array([0.0, 150.0, 199.0, 201.0, 500.0]) * M
    mask = pixels_near(np.full(5, LON0), lat, LON0, LAT0, 200.0)
    np.testing.assert_array_equal(mask, [True, True, True, False, False])
    with pytest.raises(ValueError):
        pixels_near(np.array([LON0]), np.array([LAT0]), LON0, LAT0, 0.0)


def test_average_example():
    lat = LAT0 + np.array([50.0, 150.0, 500.0]) * M
    mean, n = average_pixels_near_station(np.full(3, LON0), lat, np.array([1.0, 3.0, 100.0]), station())
    assert (mean, n) == (2.0, 2)


def test_average_excludes_empty_disc():
    mean, n = average_pixels_near_station(np.array([LON0]), np.array([LAT0 + 1000 * M]), np.array([1.0]), station())
    assert mean is None and n == 0


def test_reference_examples():
    lon = np.full(2, LON0)
    lat = np.array([LAT0, LAT0 + 5000 * M])
    f = np.array([1.0, 2.0, 3.0])
    g = np.array([5.0, 5.0, 9.0])
    traj = np.stack([np.tile(f[:, None], 3), np.tile(g[:, None], 3)])
    out = reference_to_station(traj, lon, lat, station())
    np.testing.assert_array_equal(out[0], 0.0)
    np.testing.assert_array_equal(out[1, :, 0], g - f)


def test_reference_idempotent_and_preserves_differences(rng):
    lon = LON0 + rng.uniform(-1, 1, 20) * 300 * M
    lat = LAT0 + rng.uniform(-1, 1, 20) * 300 * M
    traj = rng.normal(size=(20, 7, 3))
    once = reference_to_station(traj, lon, lat, station())
    twice = reference_to_station(once, lon, lat, station())
    np.testing.assert_allclose(twice, once, atol=1e-12)
    np.testing.assert_allclose(once[3] - once[11], traj[3] - traj[11], atol=1e-12)
    mask = pixels_near(lon, lat, LON0, LAT0)
    np.testing.assert_allclose(once[mask].mean(axis=0), 0.0, atol=1e-12)


def test_reference_without_pixels():
    with pytest.raises(DataError):
        reference_to_station(np.zeros((1, 2, 3)), np.array([LON0 + 1.0]), np.array([LAT0]), station())


def test_stats_zero():
    r = difference_stats({"a": [1, 2], "b": [3, 4]}, {"a": [1, 2], "b": [3, 4]})
    np.testing.assert_array_equal(r.mean, 0.0)
    np.testing.assert_array_equal(r.std, 0.0)


def test_stats_plus_minus_one():
    r = difference_stats({"a": [1.0, 0.0], "b": [-1.0, 0.0]}, {"a": [0.0, 0.0], "b": [0.0, 0.0]})
    assert r.mean[0] == 0.0
    assert r.std[0] == pytest.approx(math.sqrt(2.0))


def test_stats_single_station_undefined():
    r = difference_stats({"a": [1.0, 0.0]}, {"a": [0.0, 0.0]})
    assert r.n_stations == 1
    assert np.all(np.isnan(r.std)) and np.all(np.isnan(r.mean))
    assert "undefined" in r.summary()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=12), st.randoms())
def test_stats_order_invariant(values, rnd):
    ids = [f"S{i:02d}" for i in range(len(values))]
    est = {i: v for i, v in zip(ids, values)}
    ref = {i: (0.0, 0.0) for i in ids}
    shuffled = ids[:]
    rnd.shuffle(shuffled)
    a = difference_stats(est, ref)
    b = difference_stats({i: est[i] for i in shuffled}, {i: ref[i] for i in reversed(shuffled)})
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.std, b.std)
    assert a.to_table() == b.to_table()


def test_validate_velocities_with_exclusion():
    lon = np.full(3, LON0)
    lat = np.array([LAT0, LAT0 + 0.01, LAT0 + 0.02])
    v = np.array([[1.0, 2.0, 0.0], [3.0, 4.0, 0.0], [0.0, 0.0, 0.0]])
    checks = [
        station("A", lat=LAT0, vx=1.5, vy=2.0),
        station("B", lat=LAT0 + 0.01, vx=2.0, vy=4.5),
        station("C", lat=LAT0 + 0.5),
    ]
    r = validate_velocities(lon, lat, v, checks)
    assert r.excluded == ["C"]
    np.testing.assert_allclose(r.mean, [0.25, -0.25])
    np.testing.assert_allclose(r.std, [np.std([-0.5, 1.0], ddof=1), np.std([0.0, -0.5], ddof=1)])
    assert r.to_table().splitlines()[1].startswith("A,1,")
    hist = r.histogram_table(bins=2).splitlines()
    assert hist[0] == "component,bin_lo,bin_hi,count" and len(hist) == 5
