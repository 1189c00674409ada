"""Statistical kernels used by calibration and the analysis commands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import Scenario
from .errors import (
    DegenerateRange,
    EmptyDistribution,
    InsufficientData,
    NoObservations,
    RankDeficient,
    ZeroVariance,
)
from .geo import DistanceMatrix

# -- correlation -------------------------------------------------------------


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length vectors.

    Raises
    ------
    ZeroVariance
        If either input is constant.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size < 2:
        raise ValueError(f"need two equal-length vectors of size >= 2, got {x.size} and {y.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    # centred sums of a constant vector are pure rounding noise
    if sxx <= 1e-24 * float(x @ x) or np.ptp(x) == 0:
        raise ZeroVariance("first vector is constant")
    if syy <= 1e-24 * float(y @ y) or np.ptp(y) == 0:
        raise ZeroVariance("second vector is constant")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# -- incomplete beta and Student t -------------------------------------------


def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_tail_and_center(t: float, df: float) -> tuple[float, float]:
    # P(|T| >= |t|) and P(|T| < |t|); whichever is smaller is computed
    # directly so neither loses precision to cancellation
    t2 = t * t
    if t2 < df:
        center = betainc(0.5, df / 2.0, t2 / (df + t2))
        return 1.0 - center, center
    tail = betainc(df / 2.0, 0.5, df / (df + t2))
    return tail, 1.0 - tail


def t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return _t_tail_and_center(t, df)[0]


def t_cdf(t: float, df: float) -> float:
    """Cumulative distribution function of Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail, center = _t_tail_and_center(t, df)
    if t * t < df:
        return 0.5 + 0.5 * center if t >= 0 else 0.5 - 0.5 * center
    return 1.0 - 0.5 * tail if t >= 0 else 0.5 * tail


# -- entropy and classification -----------------------------------------------


def shannon_entropy(counts: Mapping[str, float] | Sequence[float]) -> float:
    """Natural-log Shannon entropy of the shares implied by ``counts``."""
    vals = np.asarray(list(counts.values()) if isinstance(counts, Mapping) else counts, dtype=float)
    if vals.size == 0 or np.any(vals < 0) or not np.any(vals > 0):
        raise EmptyDistribution("need at least one positive count and no negative counts")
    p = vals[vals > 0] / vals.sum()
    return float(-(p * np.log(p)).sum())


def geometric_intervals(values, k: int, eps: Optional[float] = None) -> np.ndarray:
    """``k + 1`` class breaks whose class widths grow geometrically.

    Breaks are ``min * (max/min)**(i/k)``.  Data with ``min <= 0`` is shifted
    so its minimum sits at ``eps`` (default: ``1e-3`` of the data range),
    classified, then shifted back.
    """
    v = np.asarray(values, dtype=float).ravel()
    if k < 2:
        raise ValueError("need at least two classes")
    if v.size == 0:
        raise ValueError("no values to classify")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        raise DegenerateRange(f"all values equal {lo}")
    shift = 0.0
    if lo <= 0:
        if eps is None:
            eps = 1e-3 * (hi - lo)
        shift = eps - lo
    a, b = lo + shift, hi + shift
    breaks = a * (b / a) ** (np.arange(k + 1) / k) - shift
    breaks[0], breaks[-1] = lo, hi
    return breaks


def classify(values, breaks) -> np.ndarray:
    """Class index in ``0..len(breaks)-2`` for each value; the top break is inclusive."""
    v = np.asarray(values, dtype=float)
    b = np.asarray(breaks, dtype=float)
    idx = np.searchsorted(b, v, side="right") - 1
    return np.clip(idx, 0, len(b) - 2)


def significance_stars(p: float) -> str:
    """Conventional significance codes: 0.001 ``***``, 0.01 ``**``, 0.05 ``*``, 0.1 ``.``."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


# -- distance decay ------------------------------------------------------------


@dataclass(frozen=True)
class DecaySummary:
    """Visit-weighted distribution of travel distances.

    ``bin_edges``/``bin_centers``/``density`` describe a normalised
    histogram (``sum(density * widths) == 1``).  ``ecdf_km``/``ecdf_prob``
    give the right-continuous empirical CDF.  The log-log slope is fit over
    bins whose center is at least ``fit_range_km[0]`` and whose density is
    positive.
    """

    median_km: float
    mean_of_medians_km: float
    store_medians_km: dict
    bin_edges: np.ndarray
    bin_centers: np.ndarray
    density: np.ndarray
    ecdf_km: np.ndarray
    ecdf_prob: np.ndarray
    loglog_slope: float
    loglog_intercept: float
    fit_range_km: tuple[float, float]
    fit_mask: np.ndarray


def weighted_median(x, w) -> float:
    """Smallest ``x`` at which the cumulative weight reaches half the total."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(x, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1], side="left"))
    return float(x[order][min(k, len(x) - 1)])


def _ols_line(x, y):
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float((dx @ (y - ym)) / (dx @ dx))
    return slope, float(ym - slope * xm)


def decay_analysis(
    s: Scenario, d: DistanceMatrix, bins: int = 30, fit_min_km: float = 1.0, log_bins: bool = True
) -> DecaySummary:
    """Distance-decay summary of observed visits.

    Every (neighborhood, store) pair contributes weight ``V_ij`` at distance
    ``D_ij``.  Histogram bins are log-spaced by default, which keeps the
    log-log slope of a power-law density unbiased.
    """
    v = s.visit_array
    if v.sum() <= 0:
        raise NoObservations("no visits to analyse")
    dist = np.asarray(d.values, dtype=float)
    mask = v > 0
    x, w = dist[mask], v[mask]

    medians = {}
    for j, sid in enumerate(s.store_ids):
        col = mask[:, j]
        if col.any():
            medians[sid] = weighted_median(dist[col, j], v[col, j])

    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        hi = lo * 1.001 + 1e-9
    if log_bins:
        edges = np.geomspace(lo, hi, bins + 1)
        centers = np.sqrt(edges[:-1] * edges[1:])
    else:
        edges = np.linspace(lo, hi, bins + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
    edges[0], edges[-1] = lo, hi
    density, _ = np.histogram(x, bins=edges, weights=w, density=True)

    ux, inv = np.unique(x, return_inverse=True)
    cum = np.cumsum(np.bincount(inv, weights=w))
    ecdf = cum / cum[-1]
    ecdf[-1] = 1.0

    fit = (centers >= fit_min_km) & (density > 0)
    if fit.sum() >= 2:
        slope, intercept = _ols_line(np.log(centers[fit]), np.log(density[fit]))
    else:
        slope = intercept = math.nan
    return DecaySummary(
        median_km=weighted_median(x, w),
        mean_of_medians_km=float(np.mean(list(medians.values()))),
        store_medians_km=medians,
        bin_edges=edges,
        bin_centers=centers,
        density=density,
        ecdf_km=ux,
        ecdf_prob=ecdf,
        loglog_slope=slope,
        loglog_intercept=intercept,
        fit_range_km=(float(fit_min_km), float(hi)),
        fit_mask=fit,
    )


# -- multiple linear regression ----------------------------------------------

REGRESSION_VARIABLES = (
    "total_visit_counts",
    "distance",
    "total_population",
    "median_income",
    "median_age",
    "entropy",
)


@dataclass(frozen=True)
class RegressionReport:
    variables: tuple[str, ...]
    coefficients: dict
    std_errors: dict
    t_stats: dict
    p_values: dict
    r_squared: float
    n_obs: int

    def rows(self):
        """``(variable, coef, se, t, p, stars)`` tuples, intercept first."""
        for v in ("intercept",) + self.variables:
            p = self.p_values[v]
            yield v, self.coefficients[v], self.std_errors[v], self.t_stats[v], p, significance_stars(p)


def mlr_fit(X, y, variables: Optional[Sequence[str]] = None) -> RegressionReport:
    """Ordinary least squares with an intercept.

    Solves the normal equations on max-abs scaled columns, then maps the
    coefficients and their covariance back to the original units.  P-values
    are two-sided, from Student's t with ``n - k - 1`` degrees of freedom.

    Parameters
    ----------
    X : (n, k) array or mapping of column name to values
    y : (n,) response
    variables : names for the columns of ``X`` when it is an array
    """
    if isinstance(X, Mapping):
        variables = tuple(X.keys())
        X = np.column_stack([np.asarray(X[v], dtype=float) for v in variables])
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    variables = tuple(variables) if variables is not None else tuple(f"x{i}" for i in range(k))
    if len(variables) != k or y.shape[0] != n:
        raise ValueError("design, response and variable names disagree in size")
    if "intercept" in variables:
        raise ValueError("'intercept' is reserved")
    if n <= k + 1:
        raise InsufficientData(f"{n} observations for {k} variables plus intercept")

    A = np.column_stack([np.ones(n), X])
    scale = np.abs(A).max(axis=0)
    if np.any(scale == 0):
        raise RankDeficient("a design column is identically zero")
    As = A / scale
    if np.linalg.matrix_rank(As) < k + 1:
        raise RankDeficient("design matrix is not of full column rank")
    xtx = As.T @ As
    try:
        chol = np.linalg.cholesky(xtx)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("normal equations are not positive definite") from exc
    inv_l = np.linalg.solve(chol, np.eye(k + 1))
    xtx_inv = inv_l.T @ inv_l
    bs = xtx_inv @ (As.T @ y)
    coef = bs / scale

    resid = y - A @ coef
    dof = n - k - 1
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    sigma2 = ssr / dof
    se = np.sqrt(np.clip(np.diag(xtx_inv), 0, None) * sigma2) / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = coef / se
    pvals = np.array([t_sf2(float(t), dof) for t in tstat])
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    names = ("intercept",) + variables
    return RegressionReport(
        variables=variables,
        coefficients=dict(zip(names, coef.tolist())),
        std_errors=dict(zip(names, se.tolist())),
        t_stats=dict(zip(names, tstat.tolist())),
        p_values=dict(zip(names, pvals.tolist())),
        r_squared=min(1.0, max(0.0, r2)),
        n_obs=n,
    )


def regression_design(s: Scenario, d: DistanceMatrix, group_by: Optional[str] = None):
    """Observation table for the visit-driver regression.

    One row per (neighborhood, store) pair with a positive visit count and
    every covariate present (complete cases).  Returns ``(X, y, groups)``
    where ``X`` maps each name in :data:`REGRESSION_VARIABLES` to a column
    and ``groups`` holds the store attribute named by ``group_by`` (or None).
    """
    v = s.visit_array
    cols = {name: [] for name in REGRESSION_VARIABLES}
    y, groups = [], []
    for i, nb in enumerate(s.neighborhoods):
        if nb.median_age is None or nb.median_income is None or nb.race_counts is None:
            continue
        try:
            ent = shannon_entropy(nb.race_counts)
        except EmptyDistribution:
            continue
        for j, st in enumerate(s.stores):
            if v[i, j] <= 0:
                continue
            cols["total_visit_counts"].append(st.attractiveness)
            cols["distance"].append(d.values[i, j])
            cols["total_population"].append(nb.population)
            cols["median_income"].append(nb.median_income)
            cols["median_age"].append(nb.median_age)
            cols["entropy"].append(ent)
            y.append(v[i, j])
            groups.append(getattr(st, group_by) if group_by else None)
    X = {k: np.asarray(c, dtype=float) for k, c in cols.items()}
    return X, np.asarray(y, dtype=float), groups
