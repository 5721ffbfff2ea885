import warnings

import numpy as np
import pytest
from hypothesis import strategies as st

from supplystep.curve_model import StepCurve
from supplystep.projection import NodeSet
from supplystep.weighting import ExponentialWeight, TruncatedUniformWeight

# ---------------------------------------------------------------- generators


def random_curve(rng: np.random.Generator, max_knots=50, p_hi=100.0, jump=(0.1, 50.0), allow_zero=True):
    """Monotone step curve with knots on the cent grid below ``p_hi``."""
    k = int(rng.integers(1, max_knots + 1))
    lo_tick = 0 if allow_zero else 1
    ticks = rng.choice(np.arange(lo_tick, int(round(p_hi * 100))), size=k, replace=False)
    prices = np.sort(ticks) / 100
    values = np.cumsum(rng.uniform(*jump, size=k))
    return StepCurve(prices, values)


def random_nodes(rng: np.random.Generator, size: int, p_hi=100.0) -> NodeSet:
    """``size`` nodes: 0 plus distinct cent prices strictly inside (0, p_hi)."""
    if size == 1:
        return NodeSet([0.0])
    ticks = rng.choice(np.arange(1, int(round(p_hi * 100))), size=size - 1, replace=False)
    return NodeSet(np.concatenate(([0.0], np.sort(ticks) / 100)))


def random_weight(rng: np.random.Generator):
    if rng.random() < 0.5:
        return ExponentialWeight(float(rng.uniform(0.01, 0.2)))
    return TruncatedUniformWeight(float(rng.integers(20, 151)))


@st.composite
def curves(draw, max_knots=12, p_hi=100):
    ticks = draw(st.lists(st.integers(0, p_hi * 100 - 1), min_size=1, max_size=max_knots, unique=True))
    jumps = draw(
        st.lists(
            st.floats(0.01, 100, allow_nan=False, allow_infinity=False),
            min_size=len(ticks),
            max_size=len(ticks),
        )
    )
    return StepCurve(np.sort(ticks) / 100, np.cumsum(jumps))


@st.composite
def node_sets(draw, max_size=10, p_hi=100):
    ticks = draw(st.lists(st.integers(1, p_hi * 100 - 1), max_size=max_size - 1, unique=True))
    return NodeSet(np.concatenate(([0.0], np.sort(ticks) / 100)))


weights = st.one_of(
    st.builds(ExponentialWeight, st.floats(0.005, 0.3)),
    st.builds(TruncatedUniformWeight, st.integers(101, 400).map(float)),
)


@pytest.fixture
def two_step():
    return StepCurve([10, 30], [5, 12])


@pytest.fixture
def flat40():
    return TruncatedUniformWeight(40)


@pytest.fixture(autouse=True)
def _quiet_tail_warnings():
    with warnings.catch_warnings():
        from supplystep.projection import UnconstrainedTailWarning

        warnings.simplefilter("ignore", UnconstrainedTailWarning)
        yield


# ------------------------------------------------------ acceptance summary

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if "acceptance" in report.keywords:
            _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
