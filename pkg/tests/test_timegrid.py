import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from losfusion import bay_area
from losfusion.errors import DataError
from losfusion.timegrid import (
    LosSeries,
    build_union_grid,
    date_from_decimal_year,
    decimal_year,
    grid_from_epochs,
    interpolate_series,
    resample_dataset,
)


def series(epochs, dl, var, pixel="p", sensor="s"):
    return LosSeries(sensor, pixel, np.asarray(epochs, float), np.asarray(dl, float), np.asarray(var, float))


def test_decimal_year():
    assert decimal_year("20070101") == 2007.0
    assert decimal_year(20070102) == pytest.approx(2007 + 1 / 365.25)
    assert decimal_year(dt.date(2008, 12, 31)) == pytest.approx(2008 + 365 / 365.25)


@given(st.dates(min_value=dt.date(1990, 1, 1), max_value=dt.date(2050, 12, 31)))
def test_decimal_year_inverse(d):
    assert date_from_decimal_year(decimal_year(d)) == d


def test_invalid_date():
    with pytest.raises(DataError):
        decimal_year("2007-13-01")


def test_union_of_table_dates():
    # brute-force union over the printed YYYYMMDD strings
    expected = sorted(set(bay_area.ENVISAT_DES_DATES) | set(bay_area.ENVISAT_ASC_DATES) | set(bay_area.ALOS_ASC_DATES))
    assert len(expected) == 74
    grid = build_union_grid(bay_area.ACQUISITIONS)
    assert len(grid) == 74
    assert [d.strftime("%Y%m%d") for d in grid.dates] == expected
    assert np.all(np.diff(grid.epochs) > 0)


def test_table_availability():
    grid = build_union_grid(bay_area.ACQUISITIONS)
    asc = grid.availability["envisat_asc"]
    # grid starts 20070713 (ALOS); Envisat-Asc starts 20070923
    assert not asc[0]
    first = int(np.argmax(asc))
    assert grid.dates[first] == dt.date(2007, 9, 23)
    assert grid.availability["alos_asc"][0]
    assert grid.availability["alos_asc"][-1]
    assert not grid.availability["envisat_des"][-1]


def test_identical_lists():
    a = ["20200101", "20200113", "20200125"]
    assert len(build_union_grid({"a": a, "b": list(a)})) == 3


def test_disjoint_lists():
    assert len(build_union_grid({"a": ["20200101", "20200201"], "b": ["20200105", "20200110", "20200301"]})) == 5


def test_empty_inputs_rejected():
    with pytest.raises(DataError):
        build_union_grid({})
    with pytest.raises(DataError):
        build_union_grid({"a": []})


@given(st.lists(st.lists(st.dates(min_value=dt.date(2000, 1, 1), max_value=dt.date(2010, 1, 1)), min_size=1, max_size=15), min_size=1, max_size=4))
def test_union_size_bounds(lists):
    grid = build_union_grid({f"s{i}": l for i, l in enumerate(lists)})
    sizes = [len(set(l)) for l in lists]
    assert max(sizes) <= len(grid) <= sum(sizes)


@pytest.mark.parametrize("mode", ["paper", "standard"])
def test_endpoint_f0(mode):
    s = series([0.0, 1.0], [4.0, 9.0], [2.0, 7.0])
    r = interpolate_series(s, [0.0], mode)
    assert r.dl[0] == 4.0 and r.var[0] == 2.0 and r.available[0]


def test_midpoint_both_modes():
    s = series([0.0, 1.0], [0.0, 2.0], [1.0, 1.0])
    paper = interpolate_series(s, [0.5], "paper")
    standard = interpolate_series(s, [0.5], "standard")
    assert paper.dl[0] == 1.0 and standard.dl[0] == 1.0
    # (0.5*1)^2 + (0.5*1)^2 + 1 and 0.25*1 + 0.25*1
    assert paper.var[0] == pytest.approx(1.5, rel=1e-12)
    assert standard.var[0] == pytest.approx(0.5, rel=1e-12)


def test_f1_variances():
    s = series([0.0, 1.0], [3.0, 5.0], [2.0, 7.0])
    assert interpolate_series(s, [1.0], "paper").var[0] == pytest.approx(7.0 + 2 * 2.0)
    assert interpolate_series(s, [1.0], "standard").var[0] == pytest.approx(7.0)
    assert interpolate_series(s, [1.0], "paper").dl[0] == 5.0


def test_no_extrapolation():
    s = series([1.0, 2.0, 3.0], [0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    r = interpolate_series(s, [0.5, 1.5, 3.5])
    np.testing.assert_array_equal(r.available, [False, True, False])
    assert np.isnan(r.dl[0]) and np.isnan(r.var[2])


def test_bad_inputs():
    with pytest.raises(DataError):
        interpolate_series(series([0.0], [1.0], [1.0]), [0.0])
    with pytest.raises(DataError):
        series([0.0, 0.0, 1.0], [1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    with pytest.raises(DataError):
        series([0.0, 1.0], [1.0, 2.0], [-1.0, 1.0])
    with pytest.raises(ValueError):
        interpolate_series(series([0.0, 1.0], [1, 2], [1, 1]), [0.5], "cubic")


sample_sets = st.lists(st.floats(0.0, 10.0, allow_nan=False), min_size=2, max_size=12, unique=True).map(sorted)


@given(sample_sets, st.data())
def test_exact_at_nodes(epochs, data):
    n = len(epochs)
    dl = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n))
    var = data.draw(st.lists(st.floats(0.0, 1e2), min_size=n, max_size=n))
    extra = data.draw(st.lists(st.floats(0.0, 10.0), max_size=5))
    s = series(epochs, dl, var)
    grid = grid_from_epochs(sorted(set(epochs) | set(extra)))
    for mode in ("paper", "standard"):
        r = interpolate_series(s, grid, mode)
        idx = np.searchsorted(grid.epochs, epochs)
        np.testing.assert_array_equal(r.dl[idx], np.asarray(dl))
        assert np.all(r.var[r.available] >= 0)


@given(st.floats(-100, 100), st.floats(-100, 100), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=10))
def test_monotone_in_f(a, b, fs):
    s = series([0.0, 1.0], [a, b], [1.0, 1.0])
    fs = np.sort(np.unique(fs))
    vals = interpolate_series(s, fs).dl
    d = np.diff(vals)
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    assert np.all(d >= -tol) if b >= a else np.all(d <= tol)


def test_resample_dataset():
    grid = grid_from_epochs([0.0, 0.5, 1.0])
    ok = [series([0.0, 1.0], [0.0, 1.0], [1.0, 1.0], pixel=p) for p in ("a", "b")]
    res = resample_dataset(ok, grid)
    assert sorted(res.series) == ["a", "b"] and not res.errors

    bad = series([0.5], [1.0], [1.0], pixel="c")
    res = resample_dataset({s.pixel_id: s for s in ok + [bad]}, grid)
    assert sorted(res.series) == ["a", "b"]
    assert list(res.errors) == ["c"] and "at least 2" in res.errors["c"]

    assert resample_dataset([], grid).series == {}
