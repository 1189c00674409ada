"""Huff-family trade-area models with particle-swarm calibration.

Typical use::

    from tradewinds import ingest, geo, calibrate

    report = ingest.load_dir("data/")
    dist = geo.build_distance_matrix(report.scenario)
    result = calibrate.pso_calibrate(report.scenario, dist, "thuff")
"""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    HOURS_PER_WEEK,
    GeoPoint,
    ModelKind,
    ModelParams,
    Neighborhood,
    Scenario,
    Store,
    VisitMatrix,
    validate_scenario,
)
from .geo import DistanceMatrix, build_distance_matrix, haversine_km  # noqa: E402
from .models import (  # noqa: E402
    market_share,
    observe,
    predict,
    predict_ahuff,
    predict_huff,
    predict_mhuff,
    predict_thuff,
    share_difference,
    temporal_profiles,
)
from .calibrate import PsoConfig, grid_evaluate, objective, pso_calibrate  # noqa: E402
