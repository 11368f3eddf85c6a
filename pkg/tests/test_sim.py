import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ginarcp import sim
from ginarcp.sim import (
    InnovationKind, McpGinarSpec, ParameterDomainError, SegmentSpec, SeriesParseError,
    SpecError, ThinningKind,
)


def _bi(*a, gamma):
    return SegmentSpec(a, gamma)


# ---------------------------------------------------------------- thinning


def test_thinning_of_zero_is_zero(rng):
    assert sim.binomial_thin(0.5, 0, rng) == 0
    assert sim.negbinomial_thin(0.5, 0, rng) == 0


@given(alpha=st.floats(0.01, 0.99), x=st.integers(0, 200), seed=st.integers(0, 2**32 - 1))
def test_binomial_thinning_never_exceeds_input(alpha, x, seed):
    y = sim.binomial_thin(alpha, x, np.random.default_rng(seed))
    assert 0 <= y <= x


@pytest.mark.parametrize("fn", [sim.binomial_thin, sim.negbinomial_thin])
@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_thinning_rejects_alpha_outside_unit_interval(fn, alpha, rng):
    with pytest.raises(ParameterDomainError):
        fn(alpha, 3, rng)


def _draws(fn, alpha, x, size, seed):
    rng = np.random.default_rng(seed)
    return np.array([fn(alpha, x, rng) for _ in range(size)], dtype=float)


def test_binomial_thinning_mean_monte_carlo():
    d = _draws(sim.binomial_thin, 0.3, 10, 100_000, 1)
    assert abs(d.mean() - 3.0) <= 0.05


def test_negbinomial_thinning_mean_monte_carlo():
    d = _draws(sim.negbinomial_thin, 0.4, 10, 100_000, 2)
    assert abs(d.mean() - 4.0) <= 0.07


def test_negbinomial_thinning_variance_monte_carlo():
    d = _draws(sim.negbinomial_thin, 0.5, 10, 100_000, 3)
    assert abs(d.var() - 7.5) <= 0.3


@pytest.mark.parametrize("kind", ["binomial", "negbinomial"])
@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("x", [1, 10, 100])
def test_thinning_mean_within_four_standard_errors(kind, alpha, x):
    size = 20_000
    seed = int(alpha * 100) * 1000 + x + (7 if kind == "binomial" else 0)
    if kind == "binomial":
        d = _draws(sim.binomial_thin, alpha, x, size, seed)
        var = x * alpha * (1 - alpha)
    else:
        d = _draws(sim.negbinomial_thin, alpha, x, size, seed)
        var = x * alpha * (1 + alpha)
    se = math.sqrt(var / size)
    assert abs(d.mean() - alpha * x) <= 4 * se


def test_geometric_innovations_have_mean_gamma():
    spec = SegmentSpec((), 2.0, innovation=InnovationKind.GEOMETRIC)
    x = sim.simulate_segment(spec, np.zeros(0), 100_000, np.random.default_rng(4))
    assert abs(x.mean() - 2.0) <= 4 * math.sqrt(2.0 * 3.0 / x.size)
    assert abs(x.var() - 6.0) <= 0.25


# ---------------------------------------------------------------- specs


@pytest.mark.parametrize(
    "alphas, gamma",
    [((0.6, 0.4), 1.0), ((0.0,), 1.0), ((1.2,), 1.0), ((0.5,), -0.1)],
)
def test_segment_spec_validation(alphas, gamma):
    with pytest.raises((SpecError, ParameterDomainError)):
        SegmentSpec(alphas, gamma)


def test_segment_spec_stationarity_message_names_the_sum():
    with pytest.raises(SpecError, match="sum"):
        SegmentSpec((0.7, 0.3), 1.0)


def test_mcp_spec_enforces_min_span():
    with pytest.raises(SpecError, match="minimum span"):
        McpGinarSpec((_bi(0.5, gamma=1), _bi(0.2, 0.2, 0.2, gamma=1)), (90,), 100)


def test_mcp_spec_enforces_segment_count():
    with pytest.raises(SpecError):
        McpGinarSpec((_bi(0.5, gamma=1),), (50,), 100)


def test_mcp_spec_eps_lambda():
    segs = (_bi(0.5, gamma=1), _bi(0.3, gamma=1))
    McpGinarSpec(segs, (50,), 100, eps_lambda=0.1)
    with pytest.raises(SpecError, match="eps_lambda"):
        McpGinarSpec(segs, (15,), 100, eps_lambda=0.2)


def test_spec_dict_round_trip():
    spec = sim.get_scenario("mcp-nbinar-2").build(600)
    again = McpGinarSpec.from_dict(spec.to_dict())
    assert again == spec
    assert again.segments[1].thinning is ThinningKind.NEGATIVE_BINOMIAL


def test_scenario_breaks_and_lookup():
    spec = sim.get_scenario("mcp-biinar-1").build(500)
    assert spec.taus == (200,)
    assert [s.order for s in spec.segments] == [1, 3]
    assert sim.get_scenario("mcp-biinar-sa").build().taus == (400, 800)
    with pytest.raises(KeyError, match="unknown scenario"):
        sim.get_scenario("nope")


# ---------------------------------------------------------------- paths


def test_simulate_segment_rejects_empty_length(rng):
    with pytest.raises(ValueError):
        sim.simulate_segment(_bi(0.5, gamma=0.5), [0], 0, rng)


def test_degenerate_zero_innovations_give_zero_path(rng):
    spec = SegmentSpec((0.3, 0.2), 0.0)
    assert not sim.simulate_segment(spec, [0, 0], 200, rng).any()


def test_biinar1_stationary_mean_and_autocorrelation():
    x = sim.simulate_segment(_bi(0.5, gamma=0.5), [1], 100_000, np.random.default_rng(5))
    assert abs(x.mean() - 1.0) <= 0.02
    xc = x - x.mean()
    r1 = np.dot(xc[1:], xc[:-1]) / np.dot(xc, xc)
    assert abs(r1 - 0.5) <= 0.02


def test_simulate_mcp_length_and_determinism():
    spec = sim.get_scenario("mcp-biinar-2").build(500)
    a = sim.simulate_mcp(spec, np.random.default_rng(9))
    b = sim.simulate_mcp(spec, np.random.default_rng(9))
    assert a.shape == (500,) and a.dtype.kind == "i" and (a >= 0).all()
    assert a.tobytes() == b.tobytes()


def test_mcp_biinar1_segment_means_match_stationary_means():
    spec = sim.get_scenario("mcp-biinar-1").build(500)
    reps = np.array([sim.simulate_mcp(spec, np.random.default_rng(s)) for s in range(200)])
    for j, (lo, hi) in enumerate([(0, 200), (200, 500)]):
        means = reps[:, lo + 30 : hi].mean(axis=1)
        mu = spec.segments[j].stationary_mean
        assert abs(means.mean() - mu) <= 3 * means.std(ddof=1) / math.sqrt(means.size)


def test_identical_segments_show_no_discontinuity():
    seg = _bi(0.4, gamma=1.0)
    spec = McpGinarSpec((seg, seg), (50,), 100)
    reps = np.array([sim.simulate_mcp(spec, np.random.default_rng(s)) for s in range(400)])
    diff = reps[:, 50:].mean(axis=1) - reps[:, :50].mean(axis=1)
    assert abs(diff.mean()) <= 4 * diff.std(ddof=1) / math.sqrt(diff.size)


def test_m0_spec_matches_segment_simulation_in_law():
    seg = _bi(0.5, gamma=0.5)
    spec = McpGinarSpec((seg,), (), 300)
    a = np.concatenate([sim.simulate_mcp(spec, np.random.default_rng(s)) for s in range(100)])
    assert abs(a.mean() - seg.stationary_mean) <= 0.05


# ---------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path):
    x = np.array([0, 3, 1, 7])
    p = tmp_path / "x.csv"
    sim.write_series_csv(p, x)
    assert p.read_text() == "x\n0\n3\n1\n7\n"
    np.testing.assert_array_equal(sim.read_series_csv(p), x)


def test_csv_accepts_crlf_and_trailing_blank_line():
    np.testing.assert_array_equal(sim.parse_series_csv("x\r\n1\r\n2\r\n\r\n"), [1, 2])


@pytest.mark.parametrize("bad, row", [("x\n1\n-2\n", 3), ("x\n1\n2.5\n", 3), ("x\nfoo\n", 2)])
def test_csv_errors_name_the_row(bad, row):
    with pytest.raises(SeriesParseError, match=f"row {row}"):
        sim.parse_series_csv(bad)
