"""Poisson quasi-maximum likelihood (PQML) fitting of GINAR(p) segments.

A segment ``[start, end)`` of the full series is scored with the conditional
mean ``xi_t = gamma + sum_k alpha_k x_{t-k}`` evaluated on the *observed past*,
so lags freely reach back across the segment's left boundary.  Terms whose
lags would precede the first observation are dropped, i.e. the sum starts at
``max(start, p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K

EPS_BOX = 1e-4
MAX_ITER = 200
GRAD_TOL = 1e-8
COND_LIMIT = 1e12

# pseudo-random multi-start directions, fixed once so fits stay pure
_START_TABLE = np.random.default_rng(20230517).dirichlet(np.ones(21), size=64)
_START_SCALE = np.random.default_rng(20230518).uniform(0.05, 0.9, size=64)


class InsufficientHistoryError(ValueError):
    pass


class InfeasibleSegmentError(ValueError):
    pass


class SingularInformationError(np.linalg.LinAlgError):
    pass


def as_series(x):
    """Coerce a count sequence to the float64 layout the kernels expect."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("series must be one-dimensional")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class Theta:
    alphas: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float).ravel())
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def order(self):
        return self.alphas.size

    @property
    def vector(self):
        return np.append(self.alphas, self.gamma)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[:-1].copy(), float(v[-1]))

    def to_dict(self):
        return {"alphas": self.alphas.tolist(), "gamma": self.gamma}


@dataclass(frozen=True)
class SegmentWindow:
    """Segment ``series[start:end]`` modelled with order ``order``."""

    series: np.ndarray
    start: int
    end: int
    order: int

    def __post_init__(self):
        object.__setattr__(self, "series", as_series(self.series))
        n = self.series.size
        if not 0 <= self.start < self.end <= n:
            raise ValueError(f"bad window [{self.start}, {self.end}) for series of length {n}")
        if self.order < 0:
            raise ValueError("order must be non-negative")

    @property
    def length(self):
        return self.end - self.start

    @property
    def first_term(self):
        return max(self.start, self.order)

    @property
    def n_terms(self):
        return max(self.end - self.first_term, 0)

    def data(self):
        return self.series[self.start : self.end]

    def design(self):
        return K.lag_design(self.series, self.first_term, self.end, self.order)

    def require_span(self):
        need = int(K.MIN_SPAN[self.order])
        if self.length < need:
            raise InfeasibleSegmentError(
                f"segment [{self.start}, {self.end}) of length {self.length} is shorter "
                f"than the minimum span {need} for order {self.order}"
            )


@dataclass(frozen=True)
class SegmentFit:
    theta: Theta
    loglik: float
    covariance: np.ndarray | None
    converged: bool
    iterations: int
    start: int
    end: int
    order: int
    n_terms: int
    start_logliks: np.ndarray = field(default=None, repr=False)
    trace: np.ndarray = field(default=None, repr=False)

    @property
    def se(self):
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self):
        se = self.se
        return {
            "start": self.start,
            "end": self.end,
            "order": self.order,
            "alphas": self.theta.alphas.tolist(),
            "gamma": self.theta.gamma,
            "se": None if se is None else [float(v) for v in se],
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _theta_vector(theta, order):
    if isinstance(theta, Theta):
        v = theta.vector
    else:
        v = np.asarray(theta, dtype=float).ravel()
    if v.size != order + 1:
        raise ValueError(f"theta has {v.size - 1} alphas, window order is {order}")
    return v


def conditional_mean(theta, window, t):
    """``gamma + sum_k alpha_k x_{s-k}`` at offset ``t`` inside the window.

    Lags are read from the full series, so they may cross the window's left
    boundary.
    """
    v = _theta_vector(theta, window.order)
    s = window.start + int(t)
    p = window.order
    if not window.start <= s < window.end:
        raise IndexError(f"offset {t} outside window of length {window.length}")
    if s - p < 0:
        raise InsufficientHistoryError(f"position {s} has fewer than {p} past observations")
    lags = window.series[s - p : s][::-1]
    return float(v[p] + np.dot(v[:p], lags))


def quasi_loglik(theta, window):
    """Conditional Poisson quasi-log-likelihood ``sum_t x_t log xi_t - xi_t``."""
    v = _theta_vector(theta, window.order)
    if window.n_terms == 0:
        return 0.0
    Z, y = window.design()
    return float(K.qll_value(Z, y, v))


def quasi_loglik_grad(theta, window):
    v = _theta_vector(theta, window.order)
    Z, y = window.design()
    _, g, _ = K.qll_eval(Z, y, v)
    return g


def yule_walker(window, order):
    """Yule-Walker AR coefficients of the window's own observations.

    A degenerate (e.g. constant) segment yields zeros.
    """
    x = window.data()
    if x.size <= order + 1:
        raise ValueError(f"window of length {x.size} too short for order {order}")
    if order == 0:
        return np.zeros(0)
    phi, _ = K.levinson(K.autocov(x, order), order)
    return phi


def _starts(window, y, eps):
    p = window.order
    k = (window.start * 7919 + window.end * 104729 + p * 13) % _START_TABLE.shape[0]
    return K.make_starts(
        window.data(), float(y.mean()), p, eps, _START_TABLE[k], float(_START_SCALE[k]),
        window.length > p + 1,
    )


def fit_pqml(window, covariance=True, max_iter=MAX_ITER, tol=GRAD_TOL):
    """Maximise the quasi-log-likelihood over the parameter box.

    Box: ``alpha_k >= 1e-4``, ``sum(alpha) <= 1 - 1e-4`` and
    ``1e-4 <= gamma <= 50 * (mean + 1)``.  Three starts are used (Yule-Walker,
    moment, fixed pseudo-random); the objective is concave so they normally
    agree.  ``covariance=False`` skips the sandwich matrix.
    """
    window.require_span()
    eps = EPS_BOX
    p = window.order
    Z, y = window.design()
    N = y.size
    mean = float(y.mean())
    gmax = 50.0 * (mean + 1.0)
    if p == 0:
        g = min(max(mean, eps), gmax)
        v = np.array([g])
        f = float(K.qll_value(Z, y, v))
        fit_kw = dict(
            loglik=f, converged=True, iterations=0, start_logliks=np.array([f]),
            trace=np.array([f]),
        )
    else:
        starts = _starts(window, y, eps)
        v, f, it, conv, start_vals, trace = K.fit_multistart(
            Z, y, starts, eps, gmax, max_iter, tol
        )
        fit_kw = dict(
            loglik=float(f), converged=bool(conv), iterations=int(it),
            start_logliks=start_vals, trace=trace[np.isfinite(trace)],
        )
    theta = Theta.from_vector(v)
    cov = None
    if covariance:
        try:
            cov = _sandwich(Z, y, v)
        except SingularInformationError:
            cov = np.full((p + 1, p + 1), np.nan)
    return SegmentFit(
        theta=theta, covariance=cov, start=window.start, end=window.end, order=p,
        n_terms=N, **fit_kw,
    )


def _sandwich(Z, y, v):
    J, I = K.sandwich(Z, y, v)
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > COND_LIMIT:
        raise SingularInformationError("information matrix J is singular")
    Jinv = np.linalg.inv(J)
    S = Jinv @ I @ Jinv / y.size
    return 0.5 * (S + S.T)


def sandwich_covariance(fit, window):
    """Robust covariance ``J^-1 I J^-1 / N`` of the PQML estimate.

    Square roots of the diagonal are the standard errors of
    ``(alpha_1, ..., alpha_p, gamma)``.
    """
    Z, y = window.design()
    return _sandwich(Z, y, fit.theta.vector)
