"""Core data types: stores, neighborhoods, observed visits and model parameters.

All types are frozen dataclasses.  Constructors are deliberately lenient so
that :func:`validate_scenario` can report every problem at once instead of
failing on the first one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

HOURS_PER_WEEK = 168


class ModelKind(str, Enum):
    """The four Huff-family model variants."""

    HUFF = "huff"
    MHUFF = "mhuff"
    THUFF = "thuff"
    AHUFF = "ahuff"

    @property
    def dynamic(self) -> bool:
        return self is not ModelKind.HUFF


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def problems(self) -> list[str]:
        out = []
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            out.append(f"non-finite coordinate ({self.lat}, {self.lon})")
        else:
            if not -90.0 <= self.lat <= 90.0:
                out.append(f"lat {self.lat} outside [-90, 90]")
            if not -180.0 <= self.lon <= 180.0:
                out.append(f"lon {self.lon} outside [-180, 180]")
        return out


@dataclass(frozen=True)
class Store:
    """A point of interest with a weekly visit profile.

    ``hourly_visits[t]`` holds visits in hour ``t`` of the week, where
    ``t = 0`` is Monday 00:00 and ``t = 167`` is Sunday 23:00.  When
    ``attractiveness`` is omitted it defaults to the total of
    ``hourly_visits``.
    """

    id: str
    brand: str
    location: GeoPoint
    hourly_visits: tuple[float, ...]
    attractiveness: Optional[float] = None
    city: Optional[str] = None

    def __post_init__(self):
        hv = tuple(float(v) for v in self.hourly_visits)
        object.__setattr__(self, "hourly_visits", hv)
        if self.attractiveness is None:
            object.__setattr__(self, "attractiveness", math.fsum(hv))
        else:
            object.__setattr__(self, "attractiveness", float(self.attractiveness))


@dataclass(frozen=True)
class Neighborhood:
    """A census-block-group-like origin zone represented by its centroid."""

    id: str
    centroid: GeoPoint
    population: float
    median_age: Optional[float] = None
    median_income: Optional[float] = None
    race_counts: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "population", float(self.population))
        if self.race_counts is not None:
            object.__setattr__(
                self, "race_counts", {str(k): float(v) for k, v in self.race_counts.items()}
            )


@dataclass(frozen=True)
class VisitMatrix:
    """Sparse observed visit counts keyed by ``(neighborhood_id, store_id)``."""

    entries: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "entries", {(str(i), str(j)): float(v) for (i, j), v in self.entries.items()}
        )

    def __len__(self):
        return len(self.entries)

    def to_dense(self, neighborhood_ids: Sequence[str], store_ids: Sequence[str]) -> np.ndarray:
        row = {n: k for k, n in enumerate(neighborhood_ids)}
        col = {s: k for k, s in enumerate(store_ids)}
        out = np.zeros((len(row), len(col)))
        for (i, j), v in self.entries.items():
            if i in row and j in col:
                out[row[i], col[j]] += v
        return out


@dataclass(frozen=True)
class ModelParams:
    """Attractiveness exponent ``alpha`` and distance-decay exponent ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise ValueError(f"exponents must be finite and non-negative, got ({a}, {b})")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


@dataclass(frozen=True)
class Scenario:
    """One brand-city dataset: competing stores, origin zones and observed flows."""

    stores: tuple[Store, ...]
    neighborhoods: tuple[Neighborhood, ...]
    visits: VisitMatrix = field(default_factory=VisitMatrix)
    distance_floor_km: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "stores", tuple(self.stores))
        object.__setattr__(self, "neighborhoods", tuple(self.neighborhoods))

    @cached_property
    def store_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.stores)

    @cached_property
    def neighborhood_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.neighborhoods)

    @cached_property
    def attractiveness(self) -> np.ndarray:
        a = np.array([s.attractiveness for s in self.stores], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def hourly(self) -> np.ndarray:
        """Store-by-hour visit matrix of shape ``(n_stores, 168)``."""
        h = np.array([s.hourly_visits for s in self.stores], dtype=float).reshape(
            len(self.stores), HOURS_PER_WEEK
        )
        h.flags.writeable = False
        return h

    @cached_property
    def visit_array(self) -> np.ndarray:
        """Dense observed visits, neighborhoods by stores."""
        v = self.visits.to_dense(self.neighborhood_ids, self.store_ids)
        v.flags.writeable = False
        return v


def validate_scenario(s: Scenario) -> list[str]:
    """Return a description of every invariant violation in ``s``.

    An empty list means the scenario is valid.  Nothing is mutated.
    """
    problems: list[str] = []
    if not s.stores:
        problems.append("no stores")
    if not s.neighborhoods:
        problems.append("no neighborhoods")
    if not (math.isfinite(s.distance_floor_km) and s.distance_floor_km > 0):
        problems.append(f"distance_floor_km {s.distance_floor_km} must be positive")

    seen: set[str] = set()
    for st in s.stores:
        if st.id in seen:
            problems.append(f"store {st.id}: duplicate id")
        seen.add(st.id)
        problems.extend(f"store {st.id}: {p}" for p in st.location.problems())
        n = len(st.hourly_visits)
        if n != HOURS_PER_WEEK:
            problems.append(f"store {st.id}: hourly_visits length {n} ≠ {HOURS_PER_WEEK}")
        if any(not (math.isfinite(v) and v >= 0) for v in st.hourly_visits):
            problems.append(f"store {st.id}: hourly_visits must be finite and ≥ 0")
        if not (math.isfinite(st.attractiveness) and st.attractiveness >= 0):
            problems.append(f"store {st.id}: attractiveness {st.attractiveness} must be finite and ≥ 0")

    nseen: set[str] = set()
    for nb in s.neighborhoods:
        if nb.id in nseen:
            problems.append(f"neighborhood {nb.id}: duplicate id")
        nseen.add(nb.id)
        problems.extend(f"neighborhood {nb.id}: {p}" for p in nb.centroid.problems())
        if not (math.isfinite(nb.population) and nb.population >= 0):
            problems.append(f"neighborhood {nb.id}: population {nb.population} must be finite and ≥ 0")
        for name in ("median_age", "median_income"):
            v = getattr(nb, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                problems.append(f"neighborhood {nb.id}: {name} {v} must be finite and ≥ 0")
        if nb.race_counts is not None:
            counts = list(nb.race_counts.values())
            if any(not (math.isfinite(c) and c >= 0) for c in counts):
                problems.append(f"neighborhood {nb.id}: race_counts must be finite and ≥ 0")
            elif not any(c > 0 for c in counts):
                problems.append(f"neighborhood {nb.id}: race_counts has no positive count")

    for (i, j), v in s.visits.entries.items():
        if i not in nseen:
            problems.append(f"visits ({i}, {j}): unknown neighborhood {i}")
        if j not in seen:
            problems.append(f"visits ({i}, {j}): unknown store {j}")
        if not (math.isfinite(v) and v >= 0):
            problems.append(f"visits ({i}, {j}): count {v} must be finite and ≥ 0")
    return problems
