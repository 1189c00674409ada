"""Read and write the four scenario CSV files.

Schemas (header row required, UTF-8, ``.`` decimal separator)::

    stores.csv         store_id, brand, lat, lon[, attractiveness][, city]
    hourly.csv         store_id, hour, visits          (hour 0..167, Monday 00:00 = 0)
    visits.csv         cbg_id, store_id, visits
    neighborhoods.csv  cbg_id, lat, lon, population[, median_age, median_income, race_*...]

Setting the environment variable ``TRADEWINDS_MAX_ROWS`` caps the number of
data rows read from each file.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domain import HOURS_PER_WEEK, GeoPoint, Neighborhood, Scenario, Store, VisitMatrix, validate_scenario
from .errors import JoinError, ParseError, SchemaError

log = logging.getLogger(__name__)

STORE_COLUMNS = ("store_id", "brand", "lat", "lon")
STORE_OPTIONAL = ("attractiveness", "city")
HOURLY_COLUMNS = ("store_id", "hour", "visits")
VISIT_COLUMNS = ("cbg_id", "store_id", "visits")
NEIGHBORHOOD_COLUMNS = ("cbg_id", "lat", "lon", "population")
NEIGHBORHOOD_OPTIONAL = ("median_age", "median_income")
RACE_PREFIX = "race_"

FILE_NAMES = {
    "stores": "stores.csv",
    "hourly": "hourly.csv",
    "visits": "visits.csv",
    "neighborhoods": "neighborhoods.csv",
}

PRIVACY_THRESHOLD = 5.0


@dataclass
class IngestReport:
    """Outcome of :func:`load_scenario`.

    ``rows_dropped`` maps file key to a Counter of drop reasons
    (``"privacy threshold"``, ``"unresolved id"``, ``"malformed"``).
    """

    scenario: Scenario
    rows_read: dict = field(default_factory=dict)
    rows_dropped: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _max_rows() -> Optional[int]:
    raw = os.environ.get("TRADEWINDS_MAX_ROWS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise SchemaError(f"TRADEWINDS_MAX_ROWS must be an integer, got {raw!r}") from None
    return n if n >= 0 else None


def _read(path, required, optional=(), prefix=None):
    """Yield ``(line_number, row)`` after checking the header."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    limit = _max_rows()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s) {', '.join(missing)}")
        extra = [
            c for c in header
            if c not in required and c not in optional and not (prefix and c.startswith(prefix))
        ]
        if extra:
            raise SchemaError(f"{path}: unexpected column(s) {', '.join(extra)}")
        dupes = [c for c, k in Counter(header).items() if k > 1]
        if dupes:
            raise SchemaError(f"{path}: duplicated column(s) {', '.join(dupes)}")
        reader.fieldnames = header
        rows = []
        for k, row in enumerate(reader):
            if limit is not None and k >= limit:
                break
            if None in row:
                raise ParseError(path, reader.line_num, "more fields than header columns")
            rows.append((reader.line_num, {key: (val or "").strip() for key, val in row.items()}))
        return header, rows


def _num(path, line, row, col, optional=False):
    raw = row.get(col, "")
    if raw == "":
        if optional:
            return None
        raise ParseError(path, line, f"empty value in column {col}")
    try:
        val = float(raw)
    except ValueError:
        raise ParseError(path, line, f"column {col}: cannot parse {raw!r} as a number") from None
    if not math.isfinite(val):
        raise ParseError(path, line, f"column {col}: non-finite value {raw!r}")
    return val


def _text(path, line, row, col):
    val = row.get(col, "")
    if val == "":
        raise ParseError(path, line, f"empty value in column {col}")
    return val


def load_scenario(
    stores_csv,
    hourly_csv,
    visits_csv,
    neighborhoods_csv,
    *,
    privacy_filter: bool = False,
    min_visit_threshold: float = PRIVACY_THRESHOLD,
    strict: bool = True,
    distance_floor_km: float = 0.1,
) -> IngestReport:
    """Parse, join and validate the four CSVs into a :class:`Scenario`.

    Stores and neighborhoods are sorted by id, so the result does not depend
    on row order.  Stores without hourly rows get an all-zero profile.  With
    ``privacy_filter`` on, visit rows below ``min_visit_threshold`` are
    dropped, mirroring the source data's suppression of small flows.

    With ``strict`` (the default) a row referencing an unknown id raises
    :class:`JoinError` and an unparseable row raises :class:`ParseError`;
    otherwise such rows are dropped and counted in the report.
    """
    read = {}
    dropped = {k: Counter() for k in FILE_NAMES}
    warnings = []

    def bad(key, exc, reason):
        if strict:
            raise exc
        dropped[key][reason] += 1

    # stores
    _, rows = _read(stores_csv, STORE_COLUMNS, STORE_OPTIONAL)
    read["stores"] = len(rows)
    store_rows = {}
    for line, row in rows:
        try:
            sid = _text(stores_csv, line, row, "store_id")
            rec = (
                _text(stores_csv, line, row, "brand"),
                GeoPoint(_num(stores_csv, line, row, "lat"), _num(stores_csv, line, row, "lon")),
                _num(stores_csv, line, row, "attractiveness", optional=True),
                row.get("city") or None,
            )
        except ParseError as exc:
            bad("stores", exc, "malformed")
            continue
        if sid in store_rows:
            raise SchemaError(f"{stores_csv}: duplicate store_id {sid}")
        store_rows[sid] = rec

    # hourly
    _, rows = _read(hourly_csv, HOURLY_COLUMNS)
    read["hourly"] = len(rows)
    hourly = {sid: [0.0] * HOURS_PER_WEEK for sid in store_rows}
    seen_hours = set()
    for line, row in rows:
        try:
            sid = _text(hourly_csv, line, row, "store_id")
            hour = _num(hourly_csv, line, row, "hour")
            if hour != int(hour) or not 0 <= hour < HOURS_PER_WEEK:
                raise ParseError(hourly_csv, line, f"hour {row['hour']!r} outside 0..{HOURS_PER_WEEK - 1}")
            val = _num(hourly_csv, line, row, "visits")
            if val < 0:
                raise ParseError(hourly_csv, line, f"negative visit count {val}")
        except ParseError as exc:
            bad("hourly", exc, "malformed")
            continue
        if sid not in store_rows:
            bad("hourly", JoinError(f"{hourly_csv}:{line}: unknown store_id {sid}"), "unresolved id")
            continue
        if (sid, int(hour)) in seen_hours:
            raise SchemaError(f"{hourly_csv}: duplicate row for store {sid} hour {int(hour)}")
        seen_hours.add((sid, int(hour)))
        hourly[sid][int(hour)] = val

    # neighborhoods
    header, rows = _read(neighborhoods_csv, NEIGHBORHOOD_COLUMNS, NEIGHBORHOOD_OPTIONAL, RACE_PREFIX)
    race_cols = [c for c in header if c.startswith(RACE_PREFIX)]
    read["neighborhoods"] = len(rows)
    nbhds = {}
    for line, row in rows:
        try:
            nid = _text(neighborhoods_csv, line, row, "cbg_id")
            races = {}
            for c in race_cols:
                v = _num(neighborhoods_csv, line, row, c, optional=True)
                if v is not None:
                    races[c[len(RACE_PREFIX):]] = v
            nb = Neighborhood(
                id=nid,
                centroid=GeoPoint(_num(neighborhoods_csv, line, row, "lat"),
                                  _num(neighborhoods_csv, line, row, "lon")),
                population=_num(neighborhoods_csv, line, row, "population"),
                median_age=_num(neighborhoods_csv, line, row, "median_age", optional=True),
                median_income=_num(neighborhoods_csv, line, row, "median_income", optional=True),
                # zero-population zones carry no usable composition
                race_counts=races if any(v > 0 for v in races.values()) else None,
            )
        except ParseError as exc:
            bad("neighborhoods", exc, "malformed")
            continue
        if nid in nbhds:
            raise SchemaError(f"{neighborhoods_csv}: duplicate cbg_id {nid}")
        nbhds[nid] = nb

    # visits
    _, rows = _read(visits_csv, VISIT_COLUMNS)
    read["visits"] = len(rows)
    entries = {}
    for line, row in rows:
        try:
            nid = _text(visits_csv, line, row, "cbg_id")
            sid = _text(visits_csv, line, row, "store_id")
            val = _num(visits_csv, line, row, "visits")
            if val < 0:
                raise ParseError(visits_csv, line, f"negative visit count {val}")
        except ParseError as exc:
            bad("visits", exc, "malformed")
            continue
        if nid not in nbhds or sid not in store_rows:
            unknown = nid if nid not in nbhds else sid
            bad("visits", JoinError(f"{visits_csv}:{line}: unknown id {unknown}"), "unresolved id")
            continue
        if (nid, sid) in entries:
            raise SchemaError(f"{visits_csv}: duplicate row for ({nid}, {sid})")
        if privacy_filter and val < min_visit_threshold:
            dropped["visits"]["privacy threshold"] += 1
            continue
        entries[(nid, sid)] = val
    if not entries:
        msg = f"{visits_csv}: no visit rows; calibration and decay analysis will have no observations"
        log.warning(msg)
        warnings.append(msg)

    stores = tuple(
        Store(sid, brand, loc, tuple(hourly[sid]), attractiveness=attr, city=city)
        for sid, (brand, loc, attr, city) in sorted(store_rows.items())
    )
    scenario = Scenario(
        stores=stores,
        neighborhoods=tuple(nb for _, nb in sorted(nbhds.items())),
        visits=VisitMatrix(dict(sorted(entries.items()))),
        distance_floor_km=distance_floor_km,
    )
    problems = validate_scenario(scenario)
    if problems:
        raise SchemaError("invalid scenario: " + "; ".join(problems))
    return IngestReport(
        scenario=scenario,
        rows_read=read,
        rows_dropped={k: dict(v) for k, v in dropped.items()},
        warnings=warnings,
    )


def load_dir(directory, **kwargs) -> IngestReport:
    """:func:`load_scenario` on the standard file names inside ``directory``."""
    d = Path(directory)
    return load_scenario(*(d / FILE_NAMES[k] for k in ("stores", "hourly", "visits", "neighborhoods")), **kwargs)


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_scenario(s: Scenario, out_dir) -> dict:
    """Write ``s`` as the four CSVs; returns the paths keyed like :data:`FILE_NAMES`.

    Floats are written with ``repr`` so reading them back is lossless.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in FILE_NAMES.items()}

    with paths["stores"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STORE_COLUMNS + STORE_OPTIONAL)
        for st in s.stores:
            w.writerow([st.id, st.brand, _fmt(st.location.lat), _fmt(st.location.lon),
                        _fmt(st.attractiveness), st.city or ""])

    with paths["hourly"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOURLY_COLUMNS)
        for st in s.stores:
            for t, v in enumerate(st.hourly_visits):
                w.writerow([st.id, t, _fmt(v)])

    with paths["visits"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VISIT_COLUMNS)
        for (nid, sid), v in sorted(s.visits.entries.items()):
            w.writerow([nid, sid, _fmt(v)])

    races = sorted({k for nb in s.neighborhoods if nb.race_counts for k in nb.race_counts})
    with paths["neighborhoods"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NEIGHBORHOOD_COLUMNS + NEIGHBORHOOD_OPTIONAL + tuple(RACE_PREFIX + r for r in races))
        for nb in s.neighborhoods:
            rc = nb.race_counts or {}
            w.writerow([nb.id, _fmt(nb.centroid.lat), _fmt(nb.centroid.lon), _fmt(nb.population),
                        _fmt(nb.median_age), _fmt(nb.median_income)] + [_fmt(rc.get(r)) for r in races])
    return paths
