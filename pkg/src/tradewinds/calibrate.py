"""Fit the Huff exponents by maximising predicted/observed correlation.

The objective is the Pearson correlation between the flattened predicted
tensor and the observed tensor of the same kind, restricted to
neighborhoods that have observed visits.  :func:`pso_calibrate` maximises it
with a bounded particle swarm; :func:`grid_evaluate` tabulates it on a
fixed grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import HOURS_PER_WEEK, ModelKind, ModelParams, Scenario
from .errors import AllZeroWeights, NoObservations, NonCalibratable, ZeroVariance
from .geo import DistanceMatrix
from .models import (
    ahuff_from_log_weights,
    huff_from_log_weights,
    log_weights,
    observed_arrays,
    profile_matrix,
)
from .stats import pearson

#: Exponent values tabulated by :func:`grid_evaluate` by default.
DEFAULT_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)

#: Value returned by the objective when either side has zero variance.
SENTINEL = -1.0


class Objective:
    """Correlation objective with the observed side precomputed.

    Calling the instance with ``(alpha, beta)`` returns the correlation, or
    :data:`SENTINEL` when it is undefined; ``zero_variance`` counts how
    often that happened and ``calls`` counts evaluations.

    For ``huff``, ``thuff`` and ``mhuff`` both tensors factor as
    ``a[i, j] * u[j, t]`` and ``b[i, j] * w[j, t]``, so the correlation
    over all ``(i, j, t)`` cells is assembled from per-store hour sums
    without materialising the 168-hour tensors.  ``ahuff`` does not factor
    and is evaluated on the full tensor.
    """

    def __init__(self, s: Scenario, d: DistanceMatrix, kind):
        self.kind = ModelKind(kind)
        profiles = profile_matrix(s.hourly)
        obs, support, _ = observed_arrays(s.visit_array, profiles, self.kind)
        if not support.any():
            raise NoObservations("no neighborhood has any observed visits")
        self.support = support
        with np.errstate(divide="ignore"):
            self._log_attr = np.log(np.asarray(s.attractiveness, dtype=float))
        self._log_dist = np.log(np.asarray(d.values, dtype=float)[support])
        self._profiles = profiles
        self.calls = 0
        self.zero_variance = 0
        self.n_cells = int(obs[support].size)

        if self.kind is ModelKind.AHUFF:
            self._obs_flat = obs[support].ravel()
            return
        b = obs[support] if self.kind is ModelKind.HUFF else obs[support].sum(axis=2)
        if self.kind is ModelKind.HUFF:
            u = w = np.ones((len(s.stores), 1))
        elif self.kind is ModelKind.THUFF:
            u = w = profiles
        else:
            u = np.full(profiles.shape, 1.0 / HOURS_PER_WEEK)
            w = profiles
        self._b = b
        self._u_sum = u.sum(axis=1)
        self._uu = (u * u).sum(axis=1)
        self._uw = (u * w).sum(axis=1)
        sw = (b * w.sum(axis=1)).sum()
        sww = (b * b * (w * w).sum(axis=1)).sum()
        self._sy = float(sw)
        self._syy_c = float(sww - sw * sw / self.n_cells)
        self._syy = float(sww)

    def predicted(self, alpha: float, beta: float) -> np.ndarray:
        """Predicted static probabilities on the support rows."""
        return huff_from_log_weights(log_weights(self._log_attr, self._log_dist, alpha, beta))

    def correlation(self, alpha: float, beta: float) -> float:
        """Correlation at ``(alpha, beta)``; raises :class:`ZeroVariance`."""
        if self.kind is ModelKind.AHUFF:
            lw = log_weights(self._log_attr, self._log_dist, alpha, beta)
            huff_from_log_weights(lw)
            values, _ = ahuff_from_log_weights(lw, self._profiles)
            return pearson(values.ravel(), self._obs_flat)
        a = self.predicted(alpha, beta)
        n = self.n_cells
        sx = float((a * self._u_sum).sum())
        sxx = float((a * a * self._uu).sum())
        sxy = float((a * self._b * self._uw).sum())
        vx = sxx - sx * sx / n
        if vx <= 1e-12 * sxx:
            raise ZeroVariance("predicted probabilities are constant")
        if self._syy_c <= 1e-12 * self._syy:
            raise ZeroVariance("observed probabilities are constant")
        r = (sxy - sx * self._sy / n) / math.sqrt(vx * self._syy_c)
        return max(-1.0, min(1.0, r))

    def __call__(self, alpha: float, beta: float) -> float:
        self.calls += 1
        try:
            return self.correlation(alpha, beta)
        except (ZeroVariance, AllZeroWeights):
            self.zero_variance += 1
            return SENTINEL


def objective(s: Scenario, d: DistanceMatrix, kind, p: ModelParams) -> float:
    """Pearson correlation between predicted and observed probabilities.

    Returns :data:`SENTINEL` (-1) when either side has zero variance.
    """
    return Objective(s, d, kind)(p.alpha, p.beta)


def grid_evaluate(
    s: Scenario,
    d: DistanceMatrix,
    kind,
    alphas: Sequence[float] = DEFAULT_GRID,
    betas: Sequence[float] = DEFAULT_GRID,
) -> np.ndarray:
    """Objective on the ``alphas`` x ``betas`` grid; rows are alpha, columns beta."""
    if len(alphas) == 0 or len(betas) == 0:
        raise ValueError("grids must be non-empty")
    f = Objective(s, d, kind)
    return np.array([[f(a, b) for b in betas] for a in alphas])


@dataclass
class PsoConfig:
    """Swarm settings.

    The inertia and acceleration defaults are the constriction-equivalent
    values of Clerc and Kennedy.  A restart stops early once the global
    best has improved by less than ``tolerance`` for ``patience``
    consecutive iterations.
    """

    particles: int = 10
    restarts: int = 10
    iterations: int = 100
    bounds_low: tuple[float, float] = (0.0, 0.0)
    bounds_high: tuple[float, float] = (2.0, 2.0)
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    seed: int = 0
    patience: int = 20
    tolerance: float = 1e-7

    def __post_init__(self):
        self.bounds_low = tuple(float(v) for v in self.bounds_low)
        self.bounds_high = tuple(float(v) for v in self.bounds_high)
        if len(self.bounds_low) != 2 or len(self.bounds_high) != 2:
            raise ValueError("bounds must have one entry per exponent")
        if any(lo >= hi for lo, hi in zip(self.bounds_low, self.bounds_high)):
            raise ValueError("bounds_low must be below bounds_high in every dimension")
        if min(self.bounds_low) < 0:
            raise ValueError("exponent bounds must be non-negative")
        for name in ("particles", "restarts", "iterations", "patience"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")

    @classmethod
    def from_file(cls, path, **overrides) -> "PsoConfig":
        """Read flat ``key = value`` lines (``#`` starts a comment).

        Bounds are given as comma-separated pairs, e.g. ``bounds_high = 2, 2``.
        Keyword ``overrides`` that are not None win over the file.
        """
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**{k: _coerce(k, v) for k, v in values.items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds_low"] = list(self.bounds_low)
        d["bounds_high"] = list(self.bounds_high)
        return d


def _coerce(key, value):
    if not isinstance(value, str):
        return value
    if key.startswith("bounds"):
        return tuple(float(v) for v in value.split(","))
    if key in ("particles", "restarts", "iterations", "patience", "seed"):
        return int(value)
    return float(value)


@dataclass
class CalibrationResult:
    """Best exponents found and the per-restart global-best traces."""

    best_params: ModelParams
    best_objective: float
    trace: list = field(repr=False)
    evaluations: int
    kind: ModelKind
    degenerate: bool = False
    zero_variance_evaluations: int = 0


def _run_swarm(f: Objective, cfg: PsoConfig, restart: int):
    rng = np.random.default_rng(cfg.seed + restart)
    lo = np.array(cfg.bounds_low)
    hi = np.array(cfg.bounds_high)
    n = cfg.particles
    x = lo + rng.random((n, 2)) * (hi - lo)
    v = np.zeros((n, 2))
    fx = np.array([f(*xi) for xi in x])
    if np.all(fx == SENTINEL) and f.zero_variance >= n:
        raise NonCalibratable(
            "objective has zero variance for every initial particle; "
            "the scenario cannot be calibrated"
        )
    pbest, pbest_f = x.copy(), fx.copy()
    g = int(np.argmax(pbest_f))
    gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
    trace = [gbest_f]
    seen = [fx]
    stagnant = 0
    for _ in range(cfg.iterations):
        r1 = rng.random((n, 2))
        r2 = rng.random((n, 2))
        v = cfg.inertia * v + cfg.cognitive * r1 * (pbest - x) + cfg.social * r2 * (gbest - x)
        x = x + v
        out = (x < lo) | (x > hi)
        x = np.clip(x, lo, hi)
        v[out] = 0.0
        fx = np.array([f(*xi) for xi in x])
        seen.append(fx)
        better = fx > pbest_f
        pbest[better] = x[better]
        pbest_f[better] = fx[better]
        g = int(np.argmax(pbest_f))
        prev = gbest_f
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        trace.append(gbest_f)
        stagnant = stagnant + 1 if gbest_f - prev < cfg.tolerance else 0
        if stagnant >= cfg.patience:
            break
    return gbest, gbest_f, trace, np.concatenate(seen)


def pso_calibrate(
    s: Scenario, d: DistanceMatrix, kind, cfg: Optional[PsoConfig] = None, workers: int = 1
) -> CalibrationResult:
    """Particle-swarm search for the exponents that maximise :func:`objective`.

    ``cfg.restarts`` independent swarms are run, restart ``r`` seeded with
    ``cfg.seed + r``, and the best result across restarts is returned.
    Positions that leave the bounds are clamped and the offending velocity
    component is zeroed.  ``workers > 1`` runs restarts on a thread pool;
    the result does not depend on scheduling.
    """
    cfg = cfg or PsoConfig()
    kind = ModelKind(kind)
    objectives = [Objective(s, d, kind) for _ in range(cfg.restarts)]
    jobs = list(zip(objectives, range(cfg.restarts)))
    if workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda job: _run_swarm(job[0], cfg, job[1]), jobs))
    else:
        runs = [_run_swarm(f, cfg, r) for f, r in jobs]

    best = max(range(len(runs)), key=lambda r: (runs[r][1], -r))
    pos, val = runs[best][0], runs[best][1]
    allf = np.concatenate([r[3] for r in runs])
    valid = allf[allf != SENTINEL]
    degenerate = valid.size == 0 or float(valid.max() - valid.min()) < 1e-12
    return CalibrationResult(
        best_params=ModelParams(float(pos[0]), float(pos[1])),
        best_objective=float(val),
        trace=[r[2] for r in runs],
        evaluations=sum(f.calls for f in objectives),
        kind=kind,
        degenerate=bool(degenerate),
        zero_variance_evaluations=sum(f.zero_variance for f in objectives),
    )
