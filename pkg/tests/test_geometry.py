import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from losfusion.errors import GeometryError
from losfusion.geometry import SensorGeometry, design_matrix, los_unit_vector, project_to_los

# 30-digit evaluation of the trig formula (mpmath), rounded to float
ENVISAT_DES = (0.38071671497970174, -0.087895379318630318, 0.92050485345244033)
ENVISAT_ASC = (-0.38479504467944604, -0.067849748419905599, 0.92050485345244033)
ALOS_ASC = (-0.55780125347804497, -0.098355410861180816, 0.82412618862201566)

incidences = st.floats(min_value=1e-6, max_value=90 - 1e-6)
headings = st.floats(min_value=0.0, max_value=180.0, exclude_max=True)
sides = st.sampled_from(["right", "left"])


def test_nadir_limit():
    np.testing.assert_allclose(los_unit_vector(1e-9, 123.0), (0.0, 0.0, 1.0), atol=1e-9)


@pytest.mark.parametrize(
    "inc, head, expected",
    [(23.0, 193.0, ENVISAT_DES), (23.0, 350.0, ENVISAT_ASC), (34.5, 350.0, ALOS_ASC)],
)
def test_table_geometries(inc, head, expected):
    np.testing.assert_allclose(los_unit_vector(inc, head, "right"), expected, rtol=1e-12, atol=1e-15)


def test_descending_points_east_ascending_points_west():
    assert los_unit_vector(23.0, 193.0)[0] > 0
    assert los_unit_vector(23.0, 350.0)[0] < 0


@pytest.mark.parametrize("inc", [0.0, 90.0, -5.0, 120.0, float("nan")])
def test_incidence_out_of_range(inc):
    with pytest.raises(GeometryError):
        los_unit_vector(inc, 10.0)


@pytest.mark.parametrize("head", [-1.0, 360.0])
def test_heading_out_of_range(head):
    with pytest.raises(GeometryError):
        los_unit_vector(20.0, head)


def test_bad_look_side():
    with pytest.raises(GeometryError):
        SensorGeometry("x", 20.0, 10.0, "up")


@pytest.mark.parametrize(
    "c, expected",
    [((0.0, 0.0, 1.0), 3.0), ((1.0, 0.0, 0.0), 5.0)],
)
def test_projection_axis_cases(c, expected):
    assert project_to_los(c, (5.0, 7.0, 3.0)) == expected


def test_projection_table_vector():
    g = SensorGeometry("envisat_des", 23.0, 193.0)
    assert project_to_los(g, (10.0, 10.0, 10.0)) == pytest.approx(12.133261891135117, rel=1e-12)
    assert project_to_los((0.3807, -0.0879, 0.9205), (10.0, 10.0, 10.0)) == pytest.approx(12.133, abs=1e-9)


def test_projection_vectorised_over_epochs():
    g = SensorGeometry("a", 30.0, 10.0)
    d = np.arange(12.0).reshape(4, 3)
    out = project_to_los(g, d)
    assert out.shape == (4,)
    np.testing.assert_allclose(out, [float(np.dot(g.c, row)) for row in d])


def test_design_matrix_order(geometries):
    A = design_matrix([geometries["alos_asc"], geometries["envisat_des"]])
    np.testing.assert_array_equal(A[0], geometries["alos_asc"].c)
    assert design_matrix([]).shape == (0, 3)


@given(incidences, st.floats(min_value=0.0, max_value=360.0, exclude_max=True), sides)
def test_unit_norm(inc, head, side):
    c = los_unit_vector(inc, head, side)
    assert abs(math.fsum(x * x for x in c) - 1.0) <= 1e-12
    assert c[2] == pytest.approx(math.cos(math.radians(inc)), abs=1e-15)
    assert c[2] > 0


@given(incidences, headings)
def test_mirror_symmetry(inc, head):
    right = los_unit_vector(inc, head, "right")
    left = los_unit_vector(inc, head + 180.0, "left")
    np.testing.assert_allclose(right, left, atol=1e-12)


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_projection_linear(d1, d2, a, b):
    g = SensorGeometry("s", 34.5, 350.0)
    d1, d2 = np.array(d1), np.array(d2)
    lhs = project_to_los(g, a * d1 + b * d2)
    rhs = a * project_to_los(g, d1) + b * project_to_los(g, d2)
    assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, np.abs(a * d1).max() + np.abs(b * d2).max()))
