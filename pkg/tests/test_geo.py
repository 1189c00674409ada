import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tradewinds.domain import GeoPoint, Scenario, VisitMatrix
from tradewinds.geo import EARTH_RADIUS_KM, build_distance_matrix, haversine_km

from conftest import make_nbhd, make_store


def cosine_law_km(a, b):
    """Independent oracle: spherical law of cosines."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return EARTH_RADIUS_KM * math.acos(max(-1.0, min(1.0, c)))


points = st.builds(GeoPoint, st.floats(-89.9, 89.9), st.floats(-180, 180))


def test_identity():
    assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0


def test_quarter_equator():
    oracle = cosine_law_km(GeoPoint(0, 0), GeoPoint(0, 90))
    assert abs(oracle - math.pi * EARTH_RADIUS_KM / 2) < 1e-9
    assert abs(oracle - 10007.543) < 0.01
    assert abs(haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)) - 10007.543) < 0.01


def test_one_degree_of_equator():
    oracle = cosine_law_km(GeoPoint(0, 0), GeoPoint(0, 1))
    assert abs(oracle - 111.195) < 0.001
    assert abs(haversine_km(GeoPoint(0, 0), GeoPoint(0, 1)) - 111.195) < 0.001


@settings(max_examples=200)
@given(points, points)
def test_symmetric_and_matches_oracle(a, b):
    d = haversine_km(a, b)
    assert d == haversine_km(b, a)
    assert d >= 0
    # the cosine law loses precision for tiny separations
    if d > 1.0:
        assert abs(d - cosine_law_km(a, b)) < 1e-6 * max(1.0, d) + 1e-4


@settings(max_examples=200)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-6


@given(st.floats(-170, 0), st.floats(0.1, 80), st.floats(0.1, 80))
def test_additive_along_equator(lon0, step1, step2):
    a, b, c = GeoPoint(0, lon0), GeoPoint(0, lon0 + step1), GeoPoint(0, lon0 + step1 + step2)
    assert abs(haversine_km(a, c) - haversine_km(a, b) - haversine_km(b, c)) < 1e-6


@given(st.floats(-80, 0), st.floats(0.1, 40), st.floats(0.1, 40), st.floats(-180, 180))
def test_additive_along_meridian(lat0, step1, step2, lon):
    a, b, c = GeoPoint(lat0, lon), GeoPoint(lat0 + step1, lon), GeoPoint(lat0 + step1 + step2, lon)
    assert abs(haversine_km(a, c) - haversine_km(a, b) - haversine_km(b, c)) < 1e-6


def test_floor_clamp():
    s = Scenario((make_store("a", 10.0, 10.0),), (make_nbhd("n", 10.0, 10.0),))
    d = build_distance_matrix(s)
    assert d.values[0, 0] == 0.1
    assert d.floor_km == 0.1


def test_equatorial_matrix_without_visits():
    s = Scenario(
        (make_store("a", 0.0, 0.0), make_store("b", 0.0, 3.0)),
        (make_nbhd("n1", 0.0, 1.0), make_nbhd("n2", 0.0, 5.0)),
        VisitMatrix(),
    )
    d = build_distance_matrix(s)
    deg = math.pi * EARTH_RADIUS_KM / 180
    expected = np.array([[1.0, 2.0], [5.0, 2.0]]) * deg
    np.testing.assert_allclose(d.values, expected, rtol=0, atol=1e-9)
    assert abs(deg - 111.195) < 0.001
    assert d.neighborhood_ids == ("n1", "n2") and d.store_ids == ("a", "b")


def test_matrix_entries_match_pairwise(two_by_three):
    d = build_distance_matrix(two_by_three)
    for i, nb in enumerate(two_by_three.neighborhoods):
        for j, stv in enumerate(two_by_three.stores):
            assert abs(d.values[i, j] - max(haversine_km(nb.centroid, stv.location), 0.1)) < 1e-9
