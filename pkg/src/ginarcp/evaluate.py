"""Replication harness and accuracy metrics for simulation studies."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .search import GaConfig, run_auto_pginarm_sa
from .sim import McpGinarSpec, ScenarioTemplate, get_scenario, simulate_mcp

EMPTY_DISTANCE = 1.0


def zeta(a_set, b_set):
    """Directed distance ``sup_{b in B} inf_{a in A} |a - b|``.

    ``zeta(est, truth)`` measures over-segmentation and ``zeta(truth, est)``
    under-segmentation.  An empty ``A`` against a non-empty ``B`` scores
    :data:`EMPTY_DISTANCE`; an empty ``B`` scores 0.
    """
    a = np.asarray(a_set, dtype=float).ravel()
    b = np.asarray(b_set, dtype=float).ravel()
    if b.size == 0:
        return 0.0
    if a.size == 0:
        return EMPTY_DISTANCE
    return float(np.abs(a[:, None] - b[None, :]).min(axis=0).max())


def d_distance(est, truth):
    """Mean distance from each true location to its nearest estimate."""
    e = np.asarray(est, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("truth must be non-empty")
    if e.size == 0:
        return EMPTY_DISTANCE
    return float(np.abs(e[:, None] - t[None, :]).min(axis=0).mean())


@dataclass(frozen=True)
class Scenario:
    """A generator plus the search settings used to analyse its draws."""

    name: str
    spec: McpGinarSpec
    reps: int = 50
    ga_config: GaConfig = field(default_factory=GaConfig)

    @classmethod
    def from_template(cls, template, n=None, reps=50, ga_config=None, burn_in=500):
        if isinstance(template, str):
            template = get_scenario(template)
        if not isinstance(template, ScenarioTemplate):
            raise TypeError("template must be a ScenarioTemplate or scenario name")
        return cls(template.name, template.build(n, burn_in=burn_in), reps,
                   ga_config or GaConfig())

    @property
    def true_lambdas(self):
        return self.spec.lambdas

    @property
    def true_orders(self):
        return tuple(s.order for s in self.spec.segments)

    @property
    def true_thetas(self):
        return tuple((*s.alphas, s.gamma) for s in self.spec.segments)


@dataclass(frozen=True)
class ReplicationRow:
    scenario: str
    seed: int
    m_hat: int | None
    taus: tuple
    orders: tuple
    thetas: tuple
    mdl: float | None
    wall_time: float
    empty_estimate: bool = False
    error: str | None = None

    def csv_fields(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "m_hat": "" if self.m_hat is None else self.m_hat,
            "taus": " ".join(map(str, self.taus)),
            "orders": " ".join(map(str, self.orders)),
            "thetas": json.dumps([list(t) for t in self.thetas]),
            "mdl": "" if self.mdl is None else repr(self.mdl),
            "wall_time": f"{self.wall_time:.3f}",
            "empty_estimate": int(self.empty_estimate),
            "error": self.error or "",
        }


CSV_COLUMNS = ["scenario", "seed", "m_hat", "taus", "orders", "thetas", "mdl",
               "wall_time", "empty_estimate", "error"]


def _mean(values):
    return math.fsum(values) / len(values) if values else None


def _bias_mse(estimates, truth):
    if not estimates:
        return None, None
    err = [e - truth for e in estimates]
    return _mean(err), _mean([v * v for v in err])


@dataclass
class EvalReport:
    scenario: str
    n: int
    n_reps: int
    n_failed: int
    truncated: bool
    tpr_m: float | None
    m_hat_counts: dict
    tpr_p: list
    lambda_bias: list
    lambda_mse: list
    theta_bias: list
    theta_mse: list
    zeta_over: float | None
    zeta_under: float | None
    d_mean: float | None
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "rows"}
        d["m_hat_counts"] = {str(k): v for k, v in sorted(self.m_hat_counts.items())}
        return d

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for row in self.rows:
                w.writerow(row.csv_fields())

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dict(schema_version=1, **self.to_dict()), fh, indent=2)
            fh.write("\n")


def aggregate(scenario, rows, truncated=False):
    """Reduce replication rows to an :class:`EvalReport`.

    Rows are sorted by seed first and all means use exactly rounded sums, so
    the report does not depend on the order replications finished in.
    """
    rows = sorted(rows, key=lambda r: r.seed)
    ok = [r for r in rows if r.error is None]
    lam0 = scenario.true_lambdas
    p0 = scenario.true_orders
    th0 = scenario.true_thetas
    m0 = len(lam0)
    n = scenario.spec.n
    counts = {}
    for r in ok:
        counts[r.m_hat] = counts.get(r.m_hat, 0) + 1
    hit = [r for r in ok if r.m_hat == m0]
    tpr_m = len(hit) / len(ok) if ok else None
    tpr_p = [
        (sum(r.orders[j] == p0[j] for r in hit) / len(hit)) if hit else None
        for j in range(m0 + 1)
    ]
    lambda_bias, lambda_mse = [], []
    for j in range(m0):
        b, m = _bias_mse([r.taus[j] / n for r in hit], lam0[j])
        lambda_bias.append(b)
        lambda_mse.append(m)
    theta_bias, theta_mse = [], []
    for j in range(m0 + 1):
        same = [r for r in hit if r.orders[j] == p0[j]]
        bj, mj = [], []
        for k, truth in enumerate(th0[j]):
            b, m = _bias_mse([r.thetas[j][k] for r in same], truth)
            bj.append(b)
            mj.append(m)
        theta_bias.append(bj)
        theta_mse.append(mj)
    over, under, dist = [], [], []
    for r in ok:
        est = [t / n for t in r.taus]
        over.append(zeta(est, lam0))
        under.append(zeta(lam0, est))
        if m0:
            dist.append(d_distance(est, lam0))
    return EvalReport(
        scenario=scenario.name, n=n, n_reps=len(rows), n_failed=len(rows) - len(ok),
        truncated=truncated, tpr_m=tpr_m, m_hat_counts=counts, tpr_p=tpr_p,
        lambda_bias=lambda_bias, lambda_mse=lambda_mse, theta_bias=theta_bias,
        theta_mse=theta_mse, zeta_over=_mean(over), zeta_under=_mean(under),
        d_mean=_mean(dist), rows=rows,
    )


def run_replication(scenario, seed):
    """Simulate one series with ``seed`` and segment it; failures become error rows."""
    t0 = time.perf_counter()
    try:
        x = simulate_mcp(scenario.spec, np.random.default_rng(seed))
        res = run_auto_pginarm_sa(x, scenario.ga_config.replace(seed=seed))
    except Exception as exc:  # recorded, not fatal
        return ReplicationRow(scenario.name, seed, None, (), (), (), None,
                              time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")
    seg = res.segmentation
    thetas = tuple((*f.theta.alphas.tolist(), f.theta.gamma) for f in res.fits)
    return ReplicationRow(
        scenario.name, seed, seg.m, seg.taus, seg.orders, thetas, res.score.total,
        time.perf_counter() - t0, empty_estimate=seg.m == 0 and scenario.spec.m > 0,
    )


def run_scenario(scenario, seeds=None, budget_seconds=None, on_row=None):
    """Run the replication study for ``seeds`` (default ``0 .. reps-1``).

    When ``budget_seconds`` elapses, no further replications are started and
    the report is flagged as truncated.  ``on_row`` is called with each row
    as soon as it completes.
    """
    seeds = list(range(scenario.reps)) if seeds is None else list(seeds)
    t0 = time.perf_counter()
    rows = []
    truncated = False
    for seed in seeds:
        if budget_seconds is not None and time.perf_counter() - t0 > budget_seconds:
            truncated = True
            break
        row = run_replication(scenario, int(seed))
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return aggregate(scenario, rows, truncated=truncated)
