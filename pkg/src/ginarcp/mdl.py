"""Minimum description length of a piecewise GINAR segmentation.

For ``m`` change-points, orders ``p_j`` and segment lengths ``n_j``::

    MDL = log m + (m + 1) log n + sum_j log p_j + sum_j (p_j + 1)/2 log n_j
          - sum_j L_j

with ``log m := 0`` at ``m = 0`` and ``log p_j := 0`` at ``p_j = 0``.  ``L_j``
is the maximised quasi-log-likelihood of segment ``j`` (natural logs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .estimate import SegmentFit, SegmentWindow, as_series, fit_pqml

P0_DEFAULT = 20


class FeasibilityError(ValueError):
    """A segmentation violates the minimum-span or ordering constraints."""


class BudgetExceededError(RuntimeError):
    pass


def min_span(p):
    """Smallest admissible length of a segment of order ``p``."""
    if not 0 <= p < len(K.MIN_SPAN):
        raise ValueError(f"order must lie in [0, {len(K.MIN_SPAN) - 1}], got {p}")
    return int(K.MIN_SPAN[p])


def max_change_points(eps_lambda):
    """Upper bound ``floor(1/eps_lambda) + 1`` on the change-point count."""
    return int(math.floor(1.0 / eps_lambda)) + 1


@dataclass(frozen=True)
class Segmentation:
    n: int
    taus: tuple[int, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))
        object.__setattr__(self, "orders", tuple(int(p) for p in self.orders))
        object.__setattr__(self, "n", int(self.n))

    @property
    def m(self):
        return len(self.taus)

    @property
    def boundaries(self):
        return (0, *self.taus, self.n)

    @property
    def lambdas(self):
        return tuple(t / self.n for t in self.taus)

    @property
    def lengths(self):
        b = self.boundaries
        return tuple(b[j + 1] - b[j] for j in range(len(b) - 1))

    def segments(self):
        b = self.boundaries
        return [(b[j], b[j + 1], self.orders[j]) for j in range(len(self.orders))]

    def validate(self, max_order=P0_DEFAULT, eps_lambda=None):
        if len(self.orders) != self.m + 1:
            raise FeasibilityError(f"{self.m} change-points need {self.m + 1} orders")
        b = self.boundaries
        if any(b[j + 1] <= b[j] for j in range(len(b) - 1)):
            raise FeasibilityError(f"change-points must be strictly increasing in (0, n): {self.taus}")
        for j, (s, e, p) in enumerate(self.segments()):
            if not 0 <= p <= max_order:
                raise FeasibilityError(f"segment {j + 1}: order {p} outside [0, {max_order}]")
            if e - s < min_span(p):
                raise FeasibilityError(
                    f"segment {j + 1}: length {e - s} below minimum span {min_span(p)} for order {p}"
                )
        if eps_lambda is not None:
            if self.m > max_change_points(eps_lambda):
                raise FeasibilityError(f"m={self.m} exceeds the bound for eps_lambda={eps_lambda}")
            if np.any(np.diff(np.asarray(b) / self.n) < eps_lambda):
                raise FeasibilityError(f"fractional spacing below eps_lambda={eps_lambda}")
        return self

    def to_dict(self):
        return {"m": self.m, "taus": list(self.taus), "orders": list(self.orders),
                "lambdas": list(self.lambdas)}


@dataclass(frozen=True)
class MdlScore:
    total: float
    penalty: float
    negloglik: float
    per_segment: tuple[tuple[SegmentFit, float], ...]

    def to_dict(self):
        return {
            "total": self.total,
            "penalty": self.penalty,
            "negloglik": self.negloglik,
            "segments": [
                dict(fit.to_dict(), penalty=pen) for fit, pen in self.per_segment
            ],
        }


class FitCache:
    """Memo of segment fits for one series, keyed by ``(start, end, order)``."""

    def __init__(self, series):
        self.series = as_series(series)
        self._fits = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._fits)

    def get(self, start, end, p):
        key = (start, end, p)
        fit = self._fits.get(key)
        if fit is None:
            self.misses += 1
            fit = fit_pqml(SegmentWindow(self.series, start, end, p), covariance=False)
            self._fits[key] = fit
        else:
            self.hits += 1
        return fit

    def clear(self):
        self._fits.clear()
        self.hits = self.misses = 0


def segment_penalty(p, length):
    return (math.log(p) if p > 0 else 0.0) + 0.5 * (p + 1) * math.log(length)


def global_penalty(m, n):
    return (math.log(m) if m > 0 else 0.0) + (m + 1) * math.log(n)


def _score(cache, seg):
    fits = []
    seg_pen = 0.0
    loglik = 0.0
    for s, e, p in seg.segments():
        fit = cache.get(s, e, p)
        pen = segment_penalty(p, e - s)
        fits.append((fit, pen))
        seg_pen += pen
        loglik += fit.loglik
    penalty = global_penalty(seg.m, seg.n) + seg_pen
    negloglik = -loglik
    return MdlScore(penalty + negloglik, penalty, negloglik, tuple(fits))


def mdl_score(series, seg, cache=None, max_order=P0_DEFAULT):
    """MDL of ``seg`` on ``series``; lower is better.

    Raises :class:`FeasibilityError` for an infeasible segmentation.
    """
    if cache is None:
        cache = FitCache(series)
    if cache.series.size != seg.n or np.shape(series)[0] != seg.n:
        raise FeasibilityError(f"segmentation is for n={seg.n}, series has {cache.series.size}")
    seg.validate(max_order=max_order)
    return _score(cache, seg)


def exhaustive_minimize(series, max_m, max_p, budget=200_000, cache=None):
    """Global MDL minimiser over all segmentations with ``m <= max_m``, ``p_j <= max_p``.

    Exact dynamic programming over the number of segments: apart from the
    ``log m + (m+1) log n`` term the criterion is a sum of per-segment costs.
    Intended as a test oracle; raises :class:`BudgetExceededError` when the
    number of candidate segment fits exceeds ``budget``.
    """
    cache = cache if cache is not None else FitCache(series)
    x = cache.series
    n = x.size
    spans = [min_span(p) for p in range(max_p + 1)]
    shortest = min(spans)
    if n < shortest:
        raise FeasibilityError(f"series of length {n} shorter than the minimum span {shortest}")
    n_cand = sum(
        max(n - s - spans[p] + 1, 0) for s in range(n) for p in range(max_p + 1)
    )
    if n_cand > budget:
        raise BudgetExceededError(f"{n_cand} candidate segments exceed the budget of {budget}")

    # cost[(s, e)] = best (cost, order) for a segment [s, e)
    cost = {}
    for s in range(n):
        for e in range(s + shortest, n + 1):
            best = None
            for p in range(max_p + 1):
                if e - s < spans[p]:
                    continue
                c = segment_penalty(p, e - s) - cache.get(s, e, p).loglik
                if best is None or c < best[0]:
                    best = (c, p)
            if best is not None:
                cost[(s, e)] = best

    inf = math.inf
    max_k = min(max_m + 1, n // shortest)
    # best[k][e]: minimal cost of covering [0, e) with k segments
    best = np.full((max_k + 1, n + 1), inf)
    arg = np.full((max_k + 1, n + 1), -1, dtype=np.int64)
    best[0, 0] = 0.0
    for k in range(1, max_k + 1):
        for e in range(shortest, n + 1):
            for s in range(0, e - shortest + 1):
                if best[k - 1, s] == inf or (s, e) not in cost:
                    continue
                c = best[k - 1, s] + cost[(s, e)][0]
                if c < best[k, e]:
                    best[k, e] = c
                    arg[k, e] = s
    winner = None
    for k in range(1, max_k + 1):
        if best[k, n] == inf:
            continue
        total = global_penalty(k - 1, n) + best[k, n]
        if winner is None or total < winner[0]:
            winner = (total, k)
    _, k = winner
    bounds = [n]
    e = n
    for kk in range(k, 0, -1):
        e = int(arg[kk, e])
        bounds.append(e)
    bounds = bounds[::-1]
    orders = tuple(cost[(bounds[j], bounds[j + 1])][1] for j in range(k))
    seg = Segmentation(n, tuple(bounds[1:-1]), orders)
    return seg, _score(cache, seg)
