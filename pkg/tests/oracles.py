"""Independent reference implementations used only by the tests.

Nothing here imports the optimiser or the MDL code under test; likelihoods
are recomputed with plain Python loops.
"""

import itertools
import math
import warnings

import numpy as np
from scipy.optimize import minimize

MSPAN = [10, 10, 12, 14, 16, 18, 20, 25, 25, 25, 25] + [50] * 10
EPS = 1e-4


def loglik_loop(x, start, end, alphas, gamma):
    """``sum x_t log xi_t - xi_t`` for ``t`` in ``[max(start, p), end)``."""
    p = len(alphas)
    total = 0.0
    for t in range(max(start, p), end):
        xi = gamma + sum(alphas[k] * x[t - 1 - k] for k in range(p))
        total += x[t] * math.log(xi) - xi
    return total


def grid_then_polish(x, start, end, p):
    """Maximise the quasi-likelihood by a coarse grid followed by SLSQP."""
    seg = np.asarray(x[start:end], dtype=float)
    gmax = 50.0 * (seg[max(start, p) - start :].mean() + 1.0) if end > max(start, p) else 1.0
    if p == 0:
        y = np.asarray(x[max(start, 0) : end], dtype=float)
        g = min(max(y.mean(), EPS), gmax)
        return np.array([g]), loglik_loop(x, start, end, [], g)

    def neg(v):
        return -loglik_loop(x, start, end, list(v[:p]), v[p])

    axes = [np.linspace(0.02, 0.9, 6)] * p + [np.linspace(0.1, max(seg.mean(), 0.2) * 2, 8)]
    best = None
    for point in itertools.product(*axes):
        if sum(point[:p]) >= 1 - EPS:
            continue
        val = neg(np.array(point))
        if best is None or val < best[0]:
            best = (val, np.array(point))
    cons = [{"type": "ineq", "fun": lambda v: 1 - EPS - v[:p].sum()}]
    bounds = [(EPS, 1 - EPS)] * p + [(EPS, gmax)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(neg, best[1], method="SLSQP", bounds=bounds, constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 500})
    return res.x, -res.fun


def mdl_reference(x, taus, orders, fitter=grid_then_polish):
    n = len(x)
    b = [0, *taus, n]
    m = len(taus)
    total = (math.log(m) if m else 0.0) + (m + 1) * math.log(n)
    for j, p in enumerate(orders):
        nj = b[j + 1] - b[j]
        total += (math.log(p) if p else 0.0) + 0.5 * (p + 1) * math.log(nj)
        total -= fitter(x, b[j], b[j + 1], p)[1]
    return total


def enumerate_segmentations(n, max_m, max_p):
    """Every feasible ``(taus, orders)`` with at most ``max_m`` change-points."""
    def rec(start, m_left):
        for p in range(max_p + 1):
            if n - start >= MSPAN[p]:
                yield (), (p,)
        if m_left == 0:
            return
        for p in range(max_p + 1):
            for tau in range(start + MSPAN[p], n):
                for taus, orders in rec(tau, m_left - 1):
                    yield (tau, *taus), (p, *orders)

    yield from rec(0, max_m)


def directed_distance(a_set, b_set):
    if len(b_set) == 0:
        return 0.0
    if len(a_set) == 0:
        return 1.0
    worst = 0.0
    for b in b_set:
        near = min(abs(a - b) for a in a_set)
        worst = max(worst, near)
    return worst


def mean_nearest(est, truth):
    if len(est) == 0:
        return 1.0
    return sum(min(abs(e - t) for e in est) for t in truth) / len(truth)
