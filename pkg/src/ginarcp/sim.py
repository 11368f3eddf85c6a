"""Simulation of GINAR and piecewise (MCP-GINAR) count series.

Geometric variables use the support ``{0, 1, 2, ...}``.  A geometric counting
variable with mean ``a`` has pmf ``a**k / (1 + a)**(k + 1)``, i.e. variance
``a * (1 + a)``; the same convention is used for geometric innovations with
mean ``gamma``.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import MIN_SPAN


class ParameterDomainError(ValueError):
    """A model parameter lies outside its admissible range."""


class SpecError(ValueError):
    """A simulation spec violates one of its invariants."""


class ThinningKind(str, enum.Enum):
    BINOMIAL = "binomial"
    NEGATIVE_BINOMIAL = "negbinomial"


class InnovationKind(str, enum.Enum):
    POISSON = "poisson"
    GEOMETRIC = "geometric"


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"thinning parameter must lie in (0, 1), got {alpha!r}")


def binomial_thin(alpha, x, rng):
    """``alpha o x``: the sum of ``x`` Bernoulli(alpha) draws."""
    _check_alpha(alpha)
    if x < 0:
        raise ParameterDomainError(f"count must be non-negative, got {x!r}")
    return int(rng.binomial(int(x), alpha))


def negbinomial_thin(alpha, x, rng):
    """``alpha * x``: the sum of ``x`` geometric draws with mean ``alpha``."""
    _check_alpha(alpha)
    if x < 0:
        raise ParameterDomainError(f"count must be non-negative, got {x!r}")
    if x == 0:
        return 0
    # failures before x successes, success probability 1/(1+alpha)
    return int(rng.negative_binomial(int(x), 1.0 / (1.0 + alpha)))


@dataclass(frozen=True)
class SegmentSpec:
    """One stationary GINAR(p) regime."""

    alphas: tuple[float, ...]
    gamma: float
    thinning: ThinningKind = ThinningKind.BINOMIAL
    innovation: InnovationKind = InnovationKind.POISSON

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "thinning", ThinningKind(self.thinning))
        object.__setattr__(self, "innovation", InnovationKind(self.innovation))
        if self.order > len(MIN_SPAN) - 1:
            raise SpecError(f"order {self.order} exceeds the maximum {len(MIN_SPAN) - 1}")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise SpecError(f"every alpha must lie in (0, 1), got {a!r}")
        if sum(self.alphas) >= 1.0:
            raise SpecError(
                f"stationarity requires sum(alphas) < 1, got {sum(self.alphas):.6g}"
            )
        # gamma = 0 is allowed only as a degenerate, innovation-free regime
        if not self.gamma >= 0.0:
            raise SpecError(f"gamma must be non-negative, got {self.gamma!r}")

    @property
    def order(self):
        return len(self.alphas)

    @property
    def stationary_mean(self):
        return self.gamma / (1.0 - sum(self.alphas))

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "gamma": self.gamma,
            "thinning": self.thinning.value,
            "innovation": self.innovation.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            alphas=tuple(d.get("alphas", ())),
            gamma=float(d["gamma"]),
            thinning=d.get("thinning", "binomial"),
            innovation=d.get("innovation", "poisson"),
        )


@dataclass(frozen=True)
class McpGinarSpec:
    """Piecewise GINAR process: ``segments[j]`` generates ``taus[j-1] <= t < taus[j]``."""

    segments: tuple[SegmentSpec, ...]
    taus: tuple[int, ...]
    n: int
    burn_in: int = 500
    eps_lambda: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))
        if len(self.segments) != len(self.taus) + 1:
            raise SpecError(
                f"{len(self.segments)} segments need {len(self.segments) - 1} change-points, "
                f"got {len(self.taus)}"
            )
        if self.burn_in < 0:
            raise SpecError("burn_in must be non-negative")
        bounds = self.boundaries
        for j, seg in enumerate(self.segments):
            length = bounds[j + 1] - bounds[j]
            need = int(MIN_SPAN[seg.order])
            if length < need:
                raise SpecError(
                    f"segment {j + 1} has length {length} < minimum span {need} "
                    f"for order {seg.order}"
                )
        if self.eps_lambda is not None:
            lam = np.asarray(bounds, dtype=float) / self.n
            if np.any(np.diff(lam) < self.eps_lambda):
                raise SpecError(f"fractional spacing below eps_lambda={self.eps_lambda}")

    @property
    def m(self):
        return len(self.taus)

    @property
    def boundaries(self):
        return (0, *self.taus, self.n)

    @property
    def lambdas(self):
        return tuple(t / self.n for t in self.taus)

    def to_dict(self):
        return {
            "n": self.n,
            "taus": list(self.taus),
            "burn_in": self.burn_in,
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            segments=tuple(SegmentSpec.from_dict(s) for s in d["segments"]),
            taus=tuple(d.get("taus", ())),
            n=int(d["n"]),
            burn_in=int(d.get("burn_in", 500)),
            eps_lambda=d.get("eps_lambda"),
        )


def _innovations(spec, size, rng):
    if spec.gamma == 0.0:
        return np.zeros(size, dtype=np.int64)
    if spec.innovation is InnovationKind.POISSON:
        return rng.poisson(spec.gamma, size=size).astype(np.int64)
    return rng.geometric(1.0 / (1.0 + spec.gamma), size=size).astype(np.int64) - 1


def _thin_lags(spec, lags, rng):
    # lags[k] = X_{t-k-1}
    a = np.asarray(spec.alphas)
    if spec.thinning is ThinningKind.BINOMIAL:
        return int(rng.binomial(lags, a).sum())
    out = 0
    for k in range(spec.order):
        if lags[k] > 0:
            out += int(rng.negative_binomial(lags[k], 1.0 / (1.0 + a[k])))
    return out


def _run(spec, buf, start, stop, rng):
    z = _innovations(spec, stop - start, rng)
    p = spec.order
    for t in range(start, stop):
        if p:
            lo = t - p
            if lo >= 0:
                lags = buf[lo:t][::-1]
            else:  # not enough history yet: missing lags count as zero
                lags = np.concatenate([buf[:t][::-1], np.zeros(-lo, dtype=np.int64)])
            buf[t] = _thin_lags(spec, lags, rng) + z[t - start]
        else:
            buf[t] = z[t - start]


def simulate_segment(spec, init, length, rng):
    """Iterate the GINAR recursion ``length`` times conditioning on ``init``.

    ``init`` holds the ``spec.order`` most recent values, oldest first.
    """
    if length < 1:
        raise ValueError(f"length must be at least 1, got {length}")
    init = np.asarray(init, dtype=np.int64).ravel()
    p = spec.order
    if init.size < p:
        raise ValueError(f"need {p} initial values, got {init.size}")
    if np.any(init < 0):
        raise ValueError("initial values must be non-negative")
    init = init[init.size - p :] if p else init[:0]
    buf = np.empty(p + length, dtype=np.int64)
    buf[:p] = init
    _run(spec, buf, p, p + length, rng)
    return buf[p:]


def simulate_mcp(spec, rng):
    """Simulate a piecewise GINAR path of length ``spec.n``.

    The first segment starts from innovation-only values and discards
    ``spec.burn_in`` steps; each later segment continues the same recursion
    from the observations that precede it.
    """
    first = spec.segments[0]
    p1 = first.order
    head = max(p1, 1)
    lead = head + spec.burn_in
    buf = np.empty(lead + spec.n, dtype=np.int64)
    buf[:head] = _innovations(first, head, rng)
    _run(first, buf, head, lead, rng)
    bounds = spec.boundaries
    for j, seg in enumerate(spec.segments):
        _run(seg, buf, lead + bounds[j], lead + bounds[j + 1], rng)
    return buf[lead:].copy()


# ---------------------------------------------------------------------------
# named scenarios
# ---------------------------------------------------------------------------


def _bi(*alphas, gamma):
    return SegmentSpec(alphas, gamma, ThinningKind.BINOMIAL, InnovationKind.POISSON)


def _nb(*alphas, gamma):
    return SegmentSpec(alphas, gamma, ThinningKind.NEGATIVE_BINOMIAL, InnovationKind.GEOMETRIC)


@dataclass(frozen=True)
class ScenarioTemplate:
    """A scenario defined on the fractional time scale; build for any ``n``."""

    name: str
    segments: tuple[SegmentSpec, ...]
    lambdas: tuple[float, ...]
    default_n: int = 500
    description: str = ""

    def build(self, n=None, burn_in=500):
        n = self.default_n if n is None else int(n)
        taus = tuple(int(np.floor(lam * n + 1e-9)) for lam in self.lambdas)
        return McpGinarSpec(self.segments, taus, n, burn_in=burn_in)


SCENARIOS: dict[str, ScenarioTemplate] = {
    s.name: s
    for s in [
        ScenarioTemplate(
            "mcp-biinar-1",
            (_bi(0.5, gamma=0.5), _bi(0.4877, 0.0200, 0.2923, gamma=1.0)),
            (0.4,),
        ),
        ScenarioTemplate(
            "mcp-biinar-2",
            (
                _bi(0.5, gamma=0.5),
                _bi(0.1264, 0.1052, 0.5684, gamma=1.0),
                _bi(0.4, gamma=2.0),
            ),
            (0.4, 0.8),
        ),
        ScenarioTemplate(
            "mcp-biinar-3",
            (
                _bi(0.5, gamma=0.05),
                _bi(0.1524, 0.2818, 0.3658, gamma=1.0),
                _bi(0.2, gamma=2.0),
                _bi(0.0252, 0.0502, 0.5692, 0.2054, gamma=3.0),
            ),
            (0.3, 0.5, 0.8),
        ),
        ScenarioTemplate(
            "mcp-nbinar-1",
            (_nb(0.5, gamma=0.5), _nb(0.4877, 0.0200, 0.2923, gamma=1.0)),
            (0.4,),
        ),
        ScenarioTemplate(
            "mcp-nbinar-2",
            (
                _nb(0.5, gamma=0.5),
                _nb(0.1264, 0.1052, 0.5684, gamma=1.0),
                _nb(0.4, gamma=2.0),
            ),
            (0.4, 0.8),
        ),
        ScenarioTemplate(
            "mcp-nbinar-3",
            (
                _nb(0.5, gamma=0.5),
                _nb(0.4524, 0.1818, 0.1658, gamma=1.0),
                _nb(0.4, gamma=0.5),
                _nb(0.0252, 0.1502, 0.4692, 0.1554, gamma=2.0),
            ),
            (0.3, 0.5, 0.8),
        ),
        # annealing comparison design, breaks at 400/800 of 1000
        ScenarioTemplate(
            "mcp-biinar-sa",
            (
                _bi(0.5, gamma=0.5),
                _bi(0.2493, 0.254, 0.2967, gamma=1.0),
                _bi(0.4, gamma=0.5),
            ),
            (0.4, 0.8),
            default_n=1000,
        ),
        # negative-binomial four-regime design, breaks at 300/500/800 of 1000
        ScenarioTemplate(
            "mcp-nbinar-4",
            (
                _nb(0.5, gamma=0.5),
                _nb(0.4524, 0.1818, 0.1658, gamma=1.0),
                _nb(0.4, gamma=0.5),
                _nb(0.0252, 0.1502, 0.4692, 0.1554, gamma=2.0),
            ),
            (0.3, 0.5, 0.8),
            default_n=1000,
        ),
    ]
}


def get_scenario(name):
    try:
        return SCENARIOS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


class SeriesParseError(ValueError):
    pass


def write_series_csv(path, values, column="x"):
    values = np.asarray(values)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(column + "\n")
        for v in values:
            fh.write(f"{int(v)}\n")


def parse_series_csv(text):
    """Parse a single-column CSV with a header row into a count array.

    Raises :class:`SeriesParseError` naming the offending row for negative
    or non-integral entries.
    """
    rows = list(csv.reader(io.StringIO(text)))
    while rows and (not rows[-1] or all(not c.strip() for c in rows[-1])):
        rows.pop()
    if not rows:
        raise SeriesParseError("empty input")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not row[0].strip():
            raise SeriesParseError(f"row {lineno}: empty value")
        cell = row[0].strip()
        try:
            val = float(cell)
        except ValueError:
            raise SeriesParseError(f"row {lineno}: not a number: {cell!r}") from None
        if not np.isfinite(val) or val != int(val):
            raise SeriesParseError(f"row {lineno}: not an integer: {cell!r}")
        if val < 0:
            raise SeriesParseError(f"row {lineno}: negative count {cell!r}")
        out.append(int(val))
    return np.asarray(out, dtype=np.int64)


def read_series_csv(path):
    return parse_series_csv(Path(path).read_text(encoding="utf-8"))
