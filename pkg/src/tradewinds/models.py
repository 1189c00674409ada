"""Predicted and observed visit probabilities for the Huff model family.

Four variants are supported:

``huff``
    Static model.  ``P[i, j]`` is proportional to ``S_j**alpha / D_ij**beta``
    and normalised over the stores available to neighborhood ``i``.
``thuff``
    Time-aware model.  The static probability is multiplied by the store's
    temporal profile, ``P[i, j, t] = P[i, j] * P_jt``, so each neighborhood's
    probabilities sum to one over all stores and all 168 hours.
``ahuff``
    Stores compete within each hour: ``S_j**alpha / D_ij**beta * P_jt`` is
    normalised over stores separately for every hour.
``mhuff``
    Baseline that spreads the static probability evenly over the week,
    ``P[i, j, t] = P[i, j] / 168``.

Weights are formed in log space (``alpha*ln S - beta*ln D``) and normalised
after a max-shift, so large exponents do not overflow.  ``0**0`` is taken
as 1: with ``alpha == 0`` attractiveness drops out entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import HOURS_PER_WEEK, ModelKind, ModelParams, Scenario
from .errors import AllZeroWeights, KindMismatch, NoObservations
from .geo import DistanceMatrix


@dataclass(frozen=True)
class TemporalProfile:
    store_id: str
    probs: np.ndarray


@dataclass(frozen=True)
class PredictionTensor:
    """Model output.

    ``values`` has shape ``(n_neighborhoods, n_stores)`` for ``huff`` and
    ``(n_neighborhoods, n_stores, 168)`` for the dynamic kinds.
    ``empty_hours`` is only set for ``ahuff``: a boolean
    ``(n_neighborhoods, 168)`` mask of hours where no store has any weight
    and the slice is all zeros.
    """

    kind: ModelKind
    values: np.ndarray
    params: Optional[ModelParams]
    neighborhood_ids: tuple[str, ...]
    store_ids: tuple[str, ...]
    empty_hours: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ObservedTensor:
    """Observed visit probabilities laid out like :class:`PredictionTensor`.

    ``support`` marks neighborhoods with at least one observed visit; rows
    outside the support are zero and are ignored by comparisons.
    """

    kind: ModelKind
    values: np.ndarray
    support: np.ndarray
    neighborhood_ids: tuple[str, ...]
    store_ids: tuple[str, ...]
    empty_hours: Optional[np.ndarray] = None


# -- array kernels -----------------------------------------------------------


def profile_matrix(hourly: np.ndarray) -> np.ndarray:
    """Row-normalise a ``(n_stores, 168)`` visit matrix; all-zero rows become uniform."""
    hourly = np.asarray(hourly, dtype=float)
    tot = hourly.sum(axis=1, keepdims=True)
    out = np.full(hourly.shape, 1.0 / hourly.shape[1])
    nz = tot[:, 0] > 0
    out[nz] = hourly[nz] / tot[nz]
    return out


def log_weights(log_attr: np.ndarray, log_dist: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """``alpha*ln S_j - beta*ln D_ij`` with the ``0**0 = 1`` convention."""
    lw = -beta * log_dist if beta != 0 else np.zeros_like(log_dist)
    if alpha != 0:
        lw = lw + alpha * log_attr[None, :]
    return lw


def huff_from_log_weights(lw: np.ndarray) -> np.ndarray:
    m = lw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        bad = int(np.flatnonzero(~np.isfinite(m[:, 0]))[0])
        raise AllZeroWeights(f"every store weight is zero for neighborhood row {bad}")
    w = np.exp(lw - m)
    return w / w.sum(axis=1, keepdims=True)


def ahuff_from_log_weights(lw: np.ndarray, profiles: np.ndarray):
    """Per-hour competition.  Returns ``(values, empty_hours)``."""
    with np.errstate(divide="ignore"):
        log_p = np.log(profiles)
    lt = lw[:, :, None] + log_p[None, :, :]
    m = lt.max(axis=1, keepdims=True)
    empty = ~np.isfinite(m)
    e = np.exp(lt - np.where(empty, 0.0, m))
    den = e.sum(axis=1, keepdims=True)
    out = np.divide(e, den, out=np.zeros_like(e), where=~empty)
    return out, empty[:, 0, :]


def _logs(s: Scenario, d: DistanceMatrix):
    if d.values.shape != (len(s.neighborhoods), len(s.stores)):
        raise KindMismatch(
            f"distance matrix shape {d.values.shape} does not match scenario "
            f"({len(s.neighborhoods)}, {len(s.stores)})"
        )
    with np.errstate(divide="ignore"):
        return np.log(s.attractiveness), np.log(d.values)


# -- public operations -------------------------------------------------------


def temporal_profiles(s: Scenario) -> list[TemporalProfile]:
    """Each store's share of weekly visits falling in each hour."""
    probs = profile_matrix(s.hourly)
    return [TemporalProfile(sid, probs[k]) for k, sid in enumerate(s.store_ids)]


def _tensor(kind, values, p, s, empty=None):
    return PredictionTensor(
        kind=kind,
        values=values,
        params=p,
        neighborhood_ids=tuple(s.neighborhood_ids),
        store_ids=tuple(s.store_ids),
        empty_hours=empty,
    )


def predict_huff(s: Scenario, d: DistanceMatrix, p: ModelParams) -> PredictionTensor:
    la, ld = _logs(s, d)
    return _tensor(ModelKind.HUFF, huff_from_log_weights(log_weights(la, ld, p.alpha, p.beta)), p, s)


def predict_thuff(s: Scenario, d: DistanceMatrix, p: ModelParams) -> PredictionTensor:
    la, ld = _logs(s, d)
    pij = huff_from_log_weights(log_weights(la, ld, p.alpha, p.beta))
    return _tensor(ModelKind.THUFF, pij[:, :, None] * profile_matrix(s.hourly)[None, :, :], p, s)


def predict_ahuff(s: Scenario, d: DistanceMatrix, p: ModelParams) -> PredictionTensor:
    la, ld = _logs(s, d)
    lw = log_weights(la, ld, p.alpha, p.beta)
    # surfaces AllZeroWeights for rows where no store can attract anyone
    huff_from_log_weights(lw)
    values, empty = ahuff_from_log_weights(lw, profile_matrix(s.hourly))
    return _tensor(ModelKind.AHUFF, values, p, s, empty)


def predict_mhuff(s: Scenario, d: DistanceMatrix, p: ModelParams) -> PredictionTensor:
    la, ld = _logs(s, d)
    pij = huff_from_log_weights(log_weights(la, ld, p.alpha, p.beta))
    values = np.repeat((pij / HOURS_PER_WEEK)[:, :, None], HOURS_PER_WEEK, axis=2)
    return _tensor(ModelKind.MHUFF, values, p, s)


_PREDICTORS = {
    ModelKind.HUFF: predict_huff,
    ModelKind.THUFF: predict_thuff,
    ModelKind.AHUFF: predict_ahuff,
    ModelKind.MHUFF: predict_mhuff,
}


def predict(s: Scenario, d: DistanceMatrix, p: ModelParams, kind) -> PredictionTensor:
    """Dispatch to the predictor for ``kind``."""
    return _PREDICTORS[ModelKind(kind)](s, d, p)


def observed_arrays(visits: np.ndarray, profiles: np.ndarray, kind: ModelKind):
    """Array-level core of :func:`observe`.  Returns ``(values, support, empty)``."""
    kind = ModelKind(kind)
    rowsum = visits.sum(axis=1)
    support = rowsum > 0
    share = np.zeros_like(visits)
    share[support] = visits[support] / rowsum[support, None]
    if kind is ModelKind.HUFF:
        return share, support, None
    if kind is ModelKind.AHUFF:
        num = visits[:, :, None] * profiles[None, :, :]
        den = num.sum(axis=1, keepdims=True)
        empty = den == 0
        values = np.divide(num, den, out=np.zeros_like(num), where=~empty)
        return values, support, empty[:, 0, :]
    # thuff and mhuff share the product form
    return share[:, :, None] * profiles[None, :, :], support, None


def observe(s: Scenario, kind) -> ObservedTensor:
    """Observed visit probabilities in the layout of model ``kind``.

    For ``huff`` this is each neighborhood's share of its visits going to
    each store.  For ``ahuff`` the observed flows are weighted by the
    temporal profile and renormalised within every hour.  For ``thuff`` and
    ``mhuff`` the static shares are multiplied by the temporal profile.
    """
    kind = ModelKind(kind)
    values, support, empty = observed_arrays(s.visit_array, profile_matrix(s.hourly), kind)
    if not support.any():
        raise NoObservations("no neighborhood has any observed visits")
    return ObservedTensor(
        kind=kind,
        values=values,
        support=support,
        neighborhood_ids=tuple(s.neighborhood_ids),
        store_ids=tuple(s.store_ids),
        empty_hours=empty,
    )


# -- market share ------------------------------------------------------------


@dataclass(frozen=True)
class MarketShare:
    """Aggregated market share.

    ``store_shares`` has shape ``(n_stores,)`` for static input or a single
    selected hour, and ``(n_stores, 168)`` for a full dynamic tensor.
    ``winners[i]`` is the store with the highest probability in
    neighborhood ``i`` and ``winner_probability[i]`` that probability.
    """

    store_ids: tuple[str, ...]
    neighborhood_ids: tuple[str, ...]
    store_shares: np.ndarray
    winners: tuple[str, ...]
    winner_probability: np.ndarray = field(repr=False)


def _hour_slice(values: np.ndarray, kind: ModelKind, hour: Optional[int]) -> np.ndarray:
    if hour is None:
        return values
    if not kind.dynamic:
        raise KindMismatch("a static huff tensor has no hour axis")
    if not 0 <= hour < HOURS_PER_WEEK:
        raise KindMismatch(f"hour {hour} outside 0..{HOURS_PER_WEEK - 1}")
    return values[:, :, hour]


def market_share(pred: PredictionTensor, weights, hour: Optional[int] = None) -> MarketShare:
    """Weight-averaged store shares and per-neighborhood winning store.

    ``weights`` are per-neighborhood (population or visit totals).  For
    dynamic tensors the winner is chosen on the hour-summed probability
    unless ``hour`` selects a single slice.  Ties go to the smallest store id.
    """
    values = _hour_slice(pred.values, pred.kind, hour)
    w = np.asarray(weights, dtype=float)
    if w.shape != (values.shape[0],):
        raise KindMismatch(f"weights shape {w.shape} does not match {values.shape[0]} neighborhoods")
    total = w.sum()
    if total > 0:
        shares = np.tensordot(w, values, axes=(0, 0)) / total
    else:
        shares = values.mean(axis=0)
    per_store = values.sum(axis=2) if values.ndim == 3 else values
    order = np.argsort(np.array(pred.store_ids, dtype=object), kind="stable")
    best = order[np.argmax(per_store[:, order], axis=1)]
    return MarketShare(
        store_ids=pred.store_ids,
        neighborhood_ids=pred.neighborhood_ids,
        store_shares=shares,
        winners=tuple(pred.store_ids[k] for k in best),
        winner_probability=per_store[np.arange(len(best)), best],
    )


@dataclass(frozen=True)
class ShareDifference:
    """Predicted minus observed probability on the observed support."""

    values: np.ndarray
    neighborhood_ids: tuple[str, ...]
    store_ids: tuple[str, ...]
    hour: Optional[int]
    min: float
    max: float
    mean_abs: float


def share_difference(pred: PredictionTensor, obs: ObservedTensor, hour: Optional[int] = None) -> ShareDifference:
    """Signed ``pred - obs`` per (neighborhood, store), support rows only.

    With ``hour=None`` dynamic tensors are collapsed over the week: summed for
    ``thuff``/``mhuff`` (recovering a per-neighborhood distribution over
    stores) and averaged for ``ahuff`` (whose hourly slices are each a
    distribution).
    """
    if pred.kind is not obs.kind or pred.values.shape != obs.values.shape:
        raise KindMismatch(
            f"cannot compare {pred.kind.value}{pred.values.shape} with {obs.kind.value}{obs.values.shape}"
        )
    if hour is None and pred.kind.dynamic:
        if pred.kind is ModelKind.AHUFF:
            p, o = pred.values.mean(axis=2), obs.values.mean(axis=2)
        else:
            p, o = pred.values.sum(axis=2), obs.values.sum(axis=2)
    else:
        p = _hour_slice(pred.values, pred.kind, hour)
        o = _hour_slice(obs.values, obs.kind, hour)
    diff = (p - o)[obs.support]
    ids = tuple(n for n, keep in zip(obs.neighborhood_ids, obs.support) if keep)
    return ShareDifference(
        values=diff,
        neighborhood_ids=ids,
        store_ids=pred.store_ids,
        hour=hour,
        min=float(diff.min()),
        max=float(diff.max()),
        mean_abs=float(np.abs(diff).mean()),
    )
