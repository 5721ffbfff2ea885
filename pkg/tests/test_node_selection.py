from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, strategies as st

from supplystep.curve_model import StepCurve
from supplystep.evaluation import CurvePanel
from supplystep.node_selection import (
    ConditionalEmpirical,
    MarginalEmpirical,
    UniformGrid,
    build_distribution,
    conditional_threshold,
    quantile_nodes,
    select_nodes,
)
from supplystep.projection import DegenerateIntervalError, NodeSet
from supplystep.rng import SplitMix64
from supplystep.weighting import TruncatedUniformWeight

T0 = datetime(2016, 1, 1)


def _ecdf_inverse(sample, u):
    """Brute-force scan: smallest observation whose ECDF value reaches u."""
    xs = sorted(sample)
    for x in xs:
        if sum(1 for y in xs if y <= x) / len(xs) >= u:
            return x
    raise AssertionError


def test_quantile_nodes_marginal_fixture():
    sample = list(range(1, 101))
    expected = [0] + [_ecdf_inverse(sample, (i - 0.5) / 4) for i in range(1, 5)]
    assert expected == [0, 13, 38, 63, 88]
    assert quantile_nodes(MarginalEmpirical(sample), 4).prices.tolist() == expected


def test_quantile_nodes_uniform():
    assert quantile_nodes(UniformGrid(100), 5).prices.tolist() == [0, 25, 50, 75, 100]
    assert quantile_nodes(UniformGrid(100), 1).prices.tolist() == [0]


def test_quantile_nodes_dedup():
    assert quantile_nodes(MarginalEmpirical([5, 5, 5]), 3).prices.tolist() == [0, 5]


def test_quantile_nodes_rejects_bad_input():
    with pytest.raises(ValueError):
        quantile_nodes(UniformGrid(10), 0)
    with pytest.raises(ValueError):
        MarginalEmpirical([])
    with pytest.raises(ValueError):
        ConditionalEmpirical([1, 2], [1, 2], 3)


@given(st.lists(st.integers(0, 30000), min_size=1, max_size=200), st.integers(1, 60))
def test_quantile_nodes_match_brute_force(ticks, n):
    sample = [t / 100 for t in ticks]
    got = quantile_nodes(MarginalEmpirical(sample), n).prices.tolist()
    expected = sorted({0.0, *(_ecdf_inverse(sample, (i - 0.5) / n) for i in range(1, n + 1))})
    assert got == expected


@given(st.lists(st.integers(0, 30000), min_size=1, max_size=200), st.integers(1, 60))
def test_quantile_nodes_size_non_decreasing(ticks, n):
    dist = MarginalEmpirical([t / 100 for t in ticks])
    assert len(quantile_nodes(dist, n + 1)) >= len(quantile_nodes(dist, n))


@given(st.floats(1, 1000), st.integers(2, 60))
def test_uniform_spacing_shrinks(p_max, n):
    a = quantile_nodes(UniformGrid(p_max), n).prices
    b = quantile_nodes(UniformGrid(p_max), n + 1).prices
    assert np.diff(b).max() < np.diff(a).max()


def test_random_mode_is_seeded():
    dist = MarginalEmpirical(np.arange(1, 500) / 10)
    a = quantile_nodes(dist, 10, "random", SplitMix64(5))
    b = quantile_nodes(dist, 10, "random", SplitMix64(5))
    assert a == b
    assert set(a.prices[1:]) <= set(dist.prices)
    with pytest.raises(ValueError):
        quantile_nodes(dist, 10, "random")


def test_conditional_threshold():
    qs = list(range(1, 101))
    assert conditional_threshold(qs, 0.75) == sorted(qs)[int(np.ceil(100 * 0.75)) - 1] == 75
    assert conditional_threshold([7, 7, 7], 0.3) == 7
    assert conditional_threshold(list(range(1, 11)), 0.1) == 1
    with pytest.raises(ValueError):
        conditional_threshold([], 0.5)
    with pytest.raises(ValueError):
        conditional_threshold([1], 1.0)


def test_conditional_equals_marginal_at_zero_threshold():
    rng = np.random.default_rng(0)
    prices = np.round(rng.uniform(0, 300, 500), 2)
    quantities = rng.uniform(0.1, 50, 500)
    for n in (1, 5, 17, 40):
        assert quantile_nodes(ConditionalEmpirical(prices, quantities, 0.0), n) == quantile_nodes(
            MarginalEmpirical(prices), n
        )


# ------------------------------------------------------------ select_nodes


def _panel(day_curves, days=3):
    curves = {}
    for d in range(days):
        for h, c in enumerate(day_curves(d)):
            curves[T0 + timedelta(days=d, hours=h)] = c
    return CurvePanel(curves)


def test_select_converges_immediately_on_exact_span():
    # every curve steps only at 10 and 30; day-to-day the quantities change
    panel = _panel(lambda d: [StepCurve([10, 30], [5 + d, 12 + d])] * 24)
    dist = MarginalEmpirical([10, 30])
    nodes, trace = select_nodes(panel, TruncatedUniformWeight(40), 2, dist, n_start=2, n_cap=5)
    assert trace.status == "converged"
    assert nodes.prices.tolist() == [0, 10, 30]
    assert trace.records[0].n == 2 and trace.final.mean_approx_error == 0
    assert trace.final.mean_prediction_error > 0


def test_select_cap_reached_when_days_repeat():
    panel = _panel(lambda d: [StepCurve([10, 20, 30], [1, 2, 4])] * 24)
    nodes, trace = select_nodes(panel, TruncatedUniformWeight(40), 2, UniformGrid(35), n_start=1, n_cap=4)
    assert trace.status == "cap-reached"
    assert [r.n for r in trace.records] == [1, 2, 3, 4]
    best = min(trace.records, key=lambda r: r.mean_approx_error)
    assert nodes == quantile_nodes(UniformGrid(35), best.n)


def test_select_degenerate_reports_n():
    panel = _panel(lambda d: [StepCurve([10], [1 + d])] * 24)
    with pytest.raises(DegenerateIntervalError) as info:
        select_nodes(panel, TruncatedUniformWeight(5), 2, UniformGrid(40), n_start=3, n_cap=4)
    assert info.value.n_nodes == 3
    assert "n=3" in str(info.value)


def test_select_steps_and_bounds():
    panel = _panel(lambda d: [StepCurve([10, 20, 30], [1, 2, 4])] * 24)
    _, trace = select_nodes(panel, TruncatedUniformWeight(40), 2, UniformGrid(35), n_start=2, n_cap=9, step=3)
    assert [r.n for r in trace.records] == [2, 5, 8]
    with pytest.raises(ValueError):
        select_nodes(panel, TruncatedUniformWeight(40), 2, UniformGrid(35), n_start=3, n_cap=2)


def test_build_distribution_from_panel():
    bids = {T0: np.array([[10.0, 1.0], [20.0, 5.0], [30.0, 9.0], [40.0, 2.0]])}
    panel = CurvePanel({T0: StepCurve([10, 20, 30, 40], [1, 6, 15, 17])}, None, bids)
    assert build_distribution("marginal", panel).support().tolist() == [10, 20, 30, 40]
    cond = build_distribution("conditional", panel, 0.75)
    assert cond.threshold == 5.0 and cond.support().tolist() == [20, 30]
    assert build_distribution("uniform", panel).p_max == 40
    with pytest.raises(ValueError):
        build_distribution("bogus", panel)
