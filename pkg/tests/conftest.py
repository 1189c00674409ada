import numpy as np
import pytest

from tradewinds.domain import HOURS_PER_WEEK, GeoPoint, Neighborhood, Scenario, Store, VisitMatrix
from tradewinds.geo import DistanceMatrix
from tradewinds.synth import SynthSpec, generate

ACCEPTANCE_LINES = []


def make_store(sid, lat=0.0, lon=0.0, hourly=None, attractiveness=None, city="c"):
    if hourly is None:
        hourly = [1.0] * HOURS_PER_WEEK
    return Store(sid, "brand", GeoPoint(lat, lon), tuple(hourly), attractiveness=attractiveness, city=city)


def make_nbhd(nid, lat=0.0, lon=0.0, population=100.0, **kw):
    return Neighborhood(nid, GeoPoint(lat, lon), population, **kw)


def fixed_distances(s: Scenario, values) -> DistanceMatrix:
    """A distance matrix with chosen entries, bypassing geometry."""
    v = np.asarray(values, dtype=float).reshape(len(s.neighborhoods), len(s.stores))
    return DistanceMatrix(v, 0.1, tuple(s.neighborhood_ids), tuple(s.store_ids))


def random_scenario(rng, n_stores=None, n_nbhds=None, sparse_profiles=False):
    """Small random scenario with explicit attractiveness and visits on every row."""
    ns = n_stores or int(rng.integers(1, 6))
    nn = n_nbhds or int(rng.integers(1, 12))
    stores = []
    for j in range(ns):
        h = rng.gamma(0.5, size=HOURS_PER_WEEK)
        if sparse_profiles:
            h[rng.random(HOURS_PER_WEEK) < 0.7] = 0.0
        stores.append(make_store(f"s{j}", rng.uniform(40, 41), rng.uniform(-75, -74), h,
                                 attractiveness=float(rng.uniform(0.5, 50))))
    nbhds = [make_nbhd(f"n{i:02d}", rng.uniform(40, 41), rng.uniform(-75, -74)) for i in range(nn)]
    visits = {(f"n{i:02d}", f"s{j}"): float(rng.integers(1, 50)) for i in range(nn) for j in range(ns)}
    return Scenario(tuple(stores), tuple(nbhds), VisitMatrix(visits))


@pytest.fixture
def two_by_three():
    stores = (make_store("a", 0.0, 0.0), make_store("b", 0.0, 0.1))
    nbhds = (make_nbhd("n1", 0.0, 0.02), make_nbhd("n2", 0.0, 0.05), make_nbhd("n3", 0.01, 0.09))
    visits = VisitMatrix({("n1", "a"): 3.0, ("n1", "b"): 1.0, ("n2", "a"): 2.0, ("n3", "b"): 4.0})
    return Scenario(stores, nbhds, visits)


@pytest.fixture(scope="session")
def synth_default():
    return generate(SynthSpec(seed=7))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
