import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ginarcp import sim
from ginarcp.evaluate import (
    EMPTY_DISTANCE, ReplicationRow, Scenario, aggregate, d_distance, run_scenario,
    zeta,
)
from ginarcp.search import GaConfig

from oracles import directed_distance, mean_nearest


def test_zeta_examples():
    assert zeta([0.4], [0.4]) == 0.0
    assert zeta([0.3, 0.5], [0.4]) == pytest.approx(0.1)
    assert zeta([0.4], [0.3, 0.5]) == pytest.approx(0.1)
    assert zeta([0.1], [0.2, 0.9]) == pytest.approx(0.8)


def test_d_examples():
    assert d_distance([0.4, 0.8], [0.4, 0.8]) == 0.0
    assert d_distance([0.5], [0.4, 0.8]) == pytest.approx(0.2)


def test_empty_set_conventions():
    assert zeta([], [0.4]) == EMPTY_DISTANCE
    assert zeta([0.4], []) == 0.0
    assert d_distance([], [0.4]) == EMPTY_DISTANCE
    with pytest.raises(ValueError):
        d_distance([0.4], [])


def test_distances_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = rng.random(rng.integers(0, 6)).tolist()
        b = rng.random(rng.integers(1, 6)).tolist()
        assert abs(zeta(a, b) - directed_distance(a, b)) <= 1e-12
        assert abs(zeta(b, a) - directed_distance(b, a)) <= 1e-12
        assert abs(d_distance(a, b) - mean_nearest(a, b)) <= 1e-12


unit_sets = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6)


@given(unit_sets, unit_sets)
def test_distances_nonnegative_and_zero_on_exact_match(a, b):
    assert zeta(a, b) >= 0 and d_distance(a, b) >= 0
    assert zeta(a + b, b) == 0.0
    assert d_distance(a + b, b) == 0.0
    if zeta(a, b) == 0.0:
        assert set(b) <= set(a)


# ---------------------------------------------------------------- aggregation


SCEN = Scenario.from_template("mcp-biinar-1", n=500, reps=0)


def _row(seed, taus, orders, thetas=None, error=None):
    if error is not None:
        return ReplicationRow("mcp-biinar-1", seed, None, (), (), (), None, 0.1, error=error)
    thetas = thetas or tuple((0.5,) * o + (1.0,) for o in orders)
    return ReplicationRow("mcp-biinar-1", seed, len(taus), tuple(taus), tuple(orders), thetas,
                          100.0 + seed, 0.1, empty_estimate=not taus)


def _rows(rng, count):
    out = []
    for seed in range(count):
        k = rng.integers(0, 3)
        taus = sorted(rng.choice(np.arange(50, 450, 25), size=k, replace=False).tolist())
        orders = rng.integers(0, 4, size=k + 1).tolist()
        thetas = tuple(tuple(rng.random(o + 1).tolist()) for o in orders)
        out.append(_row(seed, taus, orders, thetas))
    return out


def test_zero_replication_report():
    rep = aggregate(SCEN, [])
    assert rep.n_reps == 0 and rep.tpr_m is None
    assert rep.tpr_p == [None, None] and rep.lambda_bias == [None]
    assert rep.zeta_over is None and rep.d_mean is None


def test_report_values_on_hand_built_rows():
    rows = [
        _row(0, [200], [1, 3]),
        _row(1, [210], [1, 2]),
        _row(2, [], [3]),
        _row(3, None, None, error="boom"),
    ]
    rep = aggregate(SCEN, rows)
    assert rep.n_reps == 4 and rep.n_failed == 1
    assert rep.tpr_m == pytest.approx(2 / 3)
    assert rep.m_hat_counts == {1: 2, 0: 1}
    assert rep.tpr_p == [1.0, 0.5]
    assert rep.lambda_bias[0] == pytest.approx(0.01)
    assert rep.lambda_mse[0] == pytest.approx((0.0**2 + 0.02**2) / 2)
    assert rep.zeta_over == pytest.approx((0 + 0.02 + EMPTY_DISTANCE) / 3)
    assert rep.zeta_under == pytest.approx((0 + 0.02 + 0) / 3)
    assert rep.d_mean == pytest.approx((0 + 0.02 + EMPTY_DISTANCE) / 3)
    # thetas of segment 2 are only averaged over the replication with the right order
    assert len(rep.theta_bias[1]) == 4
    assert rep.theta_bias[1][3] == pytest.approx(1.0 - SCEN.true_thetas[1][3])


def test_aggregation_is_permutation_invariant():
    rng = np.random.default_rng(1)
    rows = _rows(rng, 40)
    a = aggregate(SCEN, rows).to_dict()
    for _ in range(5):
        b = aggregate(SCEN, list(rng.permutation(rows))).to_dict()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_mse_dominates_squared_bias():
    rep = aggregate(SCEN, _rows(np.random.default_rng(2), 60))
    for b, m in zip(rep.lambda_bias, rep.lambda_mse):
        if b is not None:
            assert m >= b * b - 1e-15
    for bs, ms in zip(rep.theta_bias, rep.theta_mse):
        for b, m in zip(bs, ms):
            if b is not None:
                assert m >= b * b - 1e-15


# ---------------------------------------------------------------- running


def _tiny_scenario(reps=3):
    spec = sim.McpGinarSpec((sim.SegmentSpec((0.5,), 0.5), sim.SegmentSpec((0.2,), 3.0)), (60,), 120)
    cfg = GaConfig(P0=2, n_islands=2, subpop_size=10, max_generations=10)
    return Scenario("tiny", spec, reps, cfg)


def test_run_scenario_is_deterministic(tmp_path):
    s = _tiny_scenario()
    a = run_scenario(s)
    b = run_scenario(s)
    assert [r.seed for r in a.rows] == [0, 1, 2]
    strip = lambda rep: [(r.taus, r.orders, r.thetas, r.mdl) for r in rep.rows]
    assert strip(a) == strip(b)
    a.write_csv(tmp_path / "r.csv")
    a.write_json(tmp_path / "r.json")
    with open(tmp_path / "r.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3
    meta = json.loads((tmp_path / "r.json").read_text())
    assert meta["schema_version"] == 1 and meta["n_reps"] == 3


def test_replication_errors_are_rows(monkeypatch):
    from ginarcp import evaluate

    def fail(x, cfg):
        raise RuntimeError("no fit")

    monkeypatch.setattr(evaluate, "run_auto_pginarm_sa", fail)
    rep = run_scenario(_tiny_scenario(2))
    assert rep.n_reps == 2 and rep.n_failed == 2 and rep.tpr_m is None
    assert rep.rows[0].error == "RuntimeError: no fit"


def test_budget_marks_report_truncated():
    rep = run_scenario(_tiny_scenario(5), budget_seconds=0.0)
    assert rep.truncated and rep.n_reps == 0
    full = run_scenario(_tiny_scenario(2), budget_seconds=3600.0)
    assert not full.truncated and full.n_reps == 2


def test_scenario_truths():
    s = Scenario.from_template("mcp-biinar-1", n=500)
    assert s.true_lambdas == (0.4,)
    assert s.true_orders == (1, 3)
    assert math.isclose(s.true_thetas[0][0], 0.5)
