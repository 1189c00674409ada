"""Ground-truth synthetic scenarios for testing calibration and analysis."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import HOURS_PER_WEEK, GeoPoint, ModelParams, Neighborhood, Scenario, Store, VisitMatrix
from .geo import EARTH_RADIUS_KM, build_distance_matrix
from .ingest import write_scenario
from .models import predict_huff

PROFILE_SHAPES = ("uniform", "bimodal-weekday", "point-mass", "dirichlet")
RACE_CATEGORIES = ("white", "black", "asian", "hispanic", "other")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic brand-city scenario.

    ``bbox`` is ``(lat_min, lon_min, lat_max, lon_max)``.  ``kappa`` is the
    Dirichlet concentration used when ``profile_shape == "dirichlet"``.
    """

    n_stores: int = 5
    n_neighborhoods: int = 200
    alpha: float = 0.8
    beta: float = 1.2
    bbox: tuple[float, float, float, float] = (34.0, -118.5, 34.3, -118.1)
    attractiveness_range: tuple[float, float] = (1.0, 10.0)
    profile_shape: str = "dirichlet"
    kappa: float = 0.5
    visits_per_neighborhood: float = 1000.0
    noise: str = "none"
    seed: int = 0
    brand: str = "synthmart"
    city: str = "synthville"

    def __post_init__(self):
        if self.n_stores < 1 or self.n_neighborhoods < 1:
            raise ValueError("need at least one store and one neighborhood")
        lat0, lon0, lat1, lon1 = self.bbox
        if not (-90 <= lat0 < lat1 <= 90 and -180 <= lon0 < lon1 <= 180):
            raise ValueError(f"invalid bbox {self.bbox}")
        lo, hi = self.attractiveness_range
        if not 0 < lo <= hi:
            raise ValueError("attractiveness_range must be positive")
        if self.profile_shape not in PROFILE_SHAPES:
            raise ValueError(f"profile_shape must be one of {PROFILE_SHAPES}")
        if self.kappa <= 0 or self.visits_per_neighborhood <= 0:
            raise ValueError("kappa and visits_per_neighborhood must be positive")
        if self.noise not in ("none", "poisson"):
            raise ValueError("noise must be 'none' or 'poisson'")
        ModelParams(self.alpha, self.beta)

    @property
    def true_params(self) -> ModelParams:
        return ModelParams(self.alpha, self.beta)


def _bimodal_weekday(rng) -> np.ndarray:
    hours = np.arange(24)
    shift = rng.uniform(-2, 2)
    day = []
    for dow in range(7):
        if dow < 5:
            curve = np.exp(-0.5 * ((hours - 12 - shift) / 1.5) ** 2) + 1.3 * np.exp(
                -0.5 * ((hours - 18 - shift) / 1.5) ** 2
            )
        else:
            curve = 1.2 * np.exp(-0.5 * ((hours - 14 - shift) / 3.0) ** 2)
        day.append(curve + 0.01)
    p = np.concatenate(day)
    return p / p.sum()


def _profiles(spec: SynthSpec, rng) -> np.ndarray:
    n = spec.n_stores
    if spec.profile_shape == "uniform":
        return np.full((n, HOURS_PER_WEEK), 1.0 / HOURS_PER_WEEK)
    if spec.profile_shape == "point-mass":
        out = np.zeros((n, HOURS_PER_WEEK))
        out[np.arange(n), rng.integers(0, HOURS_PER_WEEK, size=n)] = 1.0
        return out
    if spec.profile_shape == "bimodal-weekday":
        return np.array([_bimodal_weekday(rng) for _ in range(n)])
    return rng.dirichlet(np.full(HOURS_PER_WEEK, spec.kappa), size=n)


def generate(spec: SynthSpec):
    """Draw a scenario whose visits follow the Huff model at ``spec``'s exponents.

    Returns ``(scenario, truth)`` where ``truth`` holds the true exponents,
    the per-store temporal profiles used and an echo of ``spec``.
    """
    rng = np.random.default_rng(spec.seed)
    lat0, lon0, lat1, lon1 = spec.bbox
    s_lat = rng.uniform(lat0, lat1, spec.n_stores)
    s_lon = rng.uniform(lon0, lon1, spec.n_stores)
    n_lat = rng.uniform(lat0, lat1, spec.n_neighborhoods)
    n_lon = rng.uniform(lon0, lon1, spec.n_neighborhoods)
    attr = rng.uniform(*spec.attractiveness_range, spec.n_stores)
    profiles = _profiles(spec, rng)

    population = rng.integers(500, 3000, spec.n_neighborhoods).astype(float)
    ages = np.round(rng.uniform(25, 55, spec.n_neighborhoods), 1)
    incomes = np.round(rng.uniform(30_000, 150_000, spec.n_neighborhoods), 0)
    race_share = rng.dirichlet(np.ones(len(RACE_CATEGORIES)), spec.n_neighborhoods)

    sw = len(str(spec.n_stores - 1))
    nw = len(str(spec.n_neighborhoods - 1))
    store_ids = [f"s{k:0{sw}d}" for k in range(spec.n_stores)]
    nbhd_ids = [f"n{k:0{nw}d}" for k in range(spec.n_neighborhoods)]
    neighborhoods = tuple(
        Neighborhood(
            id=nbhd_ids[i],
            centroid=GeoPoint(float(n_lat[i]), float(n_lon[i])),
            population=float(population[i]),
            median_age=float(ages[i]),
            median_income=float(incomes[i]),
            race_counts={
                c: float(v)
                for c, v in zip(RACE_CATEGORIES, rng.multinomial(int(population[i]), race_share[i]))
            },
        )
        for i in range(spec.n_neighborhoods)
    )
    # geometry first so the model can be evaluated before visits exist
    skeleton = Scenario(
        stores=tuple(
            Store(store_ids[j], spec.brand, GeoPoint(float(s_lat[j]), float(s_lon[j])),
                  (0.0,) * HOURS_PER_WEEK, attractiveness=float(attr[j]), city=spec.city)
            for j in range(spec.n_stores)
        ),
        neighborhoods=neighborhoods,
    )
    pij = predict_huff(skeleton, build_distance_matrix(skeleton), spec.true_params).values
    expected = spec.visits_per_neighborhood * pij
    if spec.noise == "poisson":
        v = rng.poisson(expected).astype(float)
    else:
        v = expected
    colsum = v.sum(axis=0)
    if spec.noise == "poisson":
        hourly = np.array([rng.multinomial(int(c), p) for c, p in zip(colsum, profiles)], dtype=float)
    else:
        hourly = colsum[:, None] * profiles

    entries = {
        (nbhd_ids[i], store_ids[j]): float(v[i, j])
        for i in range(spec.n_neighborhoods)
        for j in range(spec.n_stores)
        if v[i, j] > 0
    }
    stores = tuple(
        Store(st.id, st.brand, st.location, tuple(hourly[j].tolist()),
              attractiveness=st.attractiveness, city=st.city)
        for j, st in enumerate(skeleton.stores)
    )
    scenario = Scenario(stores=stores, neighborhoods=neighborhoods, visits=VisitMatrix(entries))
    truth = {
        "alpha": spec.alpha,
        "beta": spec.beta,
        "profiles": {sid: profiles[j].tolist() for j, sid in enumerate(store_ids)},
        "spec": asdict(spec),
    }
    return scenario, truth


def power_law_visits(
    n: int,
    exponent: float = 1.5,
    d_min_km: float = 1.0,
    d_max_km: float = 500.0,
    seed: int = 0,
    store_location: GeoPoint = GeoPoint(0.0, 0.0),
) -> Scenario:
    """One store and ``n`` single-visit neighborhoods at power-law distances.

    Distances have density proportional to ``d**-exponent`` on
    ``[d_min_km, d_max_km]`` (inverse-transform sampling); each
    neighborhood is placed due north of the store at its sampled distance.
    """
    if exponent == 1.0:
        raise ValueError("exponent 1 needs a log-uniform sampler")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    e = 1.0 - exponent
    d = (d_min_km**e + u * (d_max_km**e - d_min_km**e)) ** (1.0 / e)
    lat = store_location.lat + np.degrees(d / EARTH_RADIUS_KM)
    if lat.max() > 90:
        raise ValueError("d_max_km too large for the store latitude")
    w = len(str(n - 1))
    nbhds = tuple(
        Neighborhood(f"n{i:0{w}d}", GeoPoint(float(lat[i]), store_location.lon), population=1.0)
        for i in range(n)
    )
    store = Store("s0", "decay", store_location, (1.0,) * HOURS_PER_WEEK)
    visits = VisitMatrix({(nb.id, "s0"): 1.0 for nb in nbhds})
    return Scenario(stores=(store,), neighborhoods=nbhds, visits=visits)


def write_truth(truth: dict, path) -> None:
    Path(path).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")


def write_dataset(scenario: Scenario, truth: Optional[dict], out_dir) -> dict:
    """Write the four input CSVs (and ``truth.json`` when given) to ``out_dir``."""
    paths = write_scenario(scenario, out_dir)
    if truth is not None:
        paths["truth"] = Path(out_dir) / "truth.json"
        write_truth(truth, paths["truth"])
    return paths
