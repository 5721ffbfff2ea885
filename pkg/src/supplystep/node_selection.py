"""Node grids from reference price distributions, and the grid-size search.

Grids are equiprobable quantiles of a reference distribution: the ECDF of
all training bid prices, the ECDF of prices of bids whose quantity is at
least ``Q``, or a uniform distribution on ``[0, p_max]``. The search grows
the grid one node at a time until the mean approximation error on the
training curves drops below the mean naive day-lag error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np

from .evaluation import CurvePanel, mean_approx_error, mean_prediction_error, naive_pairs
from .projection import DegenerateIntervalError, NodeSet
from .rng import SplitMix64
from .weighting import WeightSpec

log = logging.getLogger(__name__)

METHODS = ("marginal", "conditional", "uniform")


@dataclass(frozen=True, eq=False)
class MarginalEmpirical:
    prices: np.ndarray

    def __post_init__(self):
        prices = np.sort(np.asarray(self.prices, dtype=float).reshape(-1))
        if prices.size == 0:
            raise ValueError("empty distribution")
        object.__setattr__(self, "prices", prices)

    def support(self) -> np.ndarray:
        return self.prices


@dataclass(frozen=True, eq=False)
class ConditionalEmpirical:
    """Prices of the bids whose quantity is at least ``threshold``."""

    prices: np.ndarray
    quantities: np.ndarray
    threshold: float

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float).reshape(-1)
        quantities = np.asarray(self.quantities, dtype=float).reshape(-1)
        if prices.shape != quantities.shape:
            raise ValueError("prices and quantities differ in length")
        kept = np.sort(prices[quantities >= self.threshold])
        if kept.size == 0:
            raise ValueError(f"empty distribution: no bid with quantity >= {self.threshold}")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "quantities", quantities)
        object.__setattr__(self, "_support", kept)

    def support(self) -> np.ndarray:
        return self._support


@dataclass(frozen=True)
class UniformGrid:
    p_max: float

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")


ReferenceDistribution = MarginalEmpirical | ConditionalEmpirical | UniformGrid


def _to_nodes(prices) -> NodeSet:
    return NodeSet(np.unique(np.concatenate(([0.0], np.asarray(prices, dtype=float)))))


def quantile_nodes(
    dist: ReferenceDistribution,
    n: int,
    sample: Literal["quantile", "random"] = "quantile",
    rng: SplitMix64 | None = None,
) -> NodeSet:
    """Node grid of nominal size ``n`` drawn from ``dist``.

    In quantile mode the empirical grid is ``F^-1((i - 0.5) / n)`` for
    ``i = 1..n`` with the left-continuous inverse, and the uniform grid is
    ``n`` equally spaced points from 0 to ``p_max``. Random mode draws ``n``
    prices i.i.d. from the distribution instead. Zero is always included and
    duplicates are dropped, so the result can have fewer than ``n + 1`` nodes.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(dist, UniformGrid):
        if sample == "random":
            rng = _need_rng(rng)
            return _to_nodes([rng.uniform() * dist.p_max for _ in range(n)])
        if n == 1:
            return NodeSet([0.0])
        return _to_nodes(np.linspace(0.0, dist.p_max, n))
    support = dist.support()
    size = support.size
    if sample == "random":
        rng = _need_rng(rng)
        return _to_nodes([support[rng.below(size)] for _ in range(n)])
    # smallest k with k/size >= (2i - 1)/(2n), in integer arithmetic
    ranks = [-(-((2 * i - 1) * size) // (2 * n)) for i in range(1, n + 1)]
    return _to_nodes(support[np.array(ranks) - 1])


def _need_rng(rng):
    if rng is None:
        raise ValueError("random sampling needs a seeded generator")
    return rng


def conditional_threshold(quantities, level: float = 0.75) -> float:
    """Type-1 empirical quantile: smallest quantity with ECDF >= ``level``."""
    q = np.sort(np.asarray(quantities, dtype=float).reshape(-1))
    if q.size == 0:
        raise ValueError("empty quantity sample")
    if not 0 < level < 1:
        raise ValueError("level must lie strictly between 0 and 1")
    k = math.ceil(Fraction(repr(float(level))) * q.size)
    return float(q[max(k, 1) - 1])


def build_distribution(method: str, panel: CurvePanel, q_level: float = 0.75) -> ReferenceDistribution:
    """Reference distribution of ``method`` from the panel's training bids."""
    prices, quantities = panel.bid_pairs("train")
    if prices.size == 0:
        raise ValueError("no training bids")
    if method == "marginal":
        return MarginalEmpirical(prices)
    if method == "conditional":
        return ConditionalEmpirical(prices, quantities, conditional_threshold(quantities, q_level))
    if method == "uniform":
        return UniformGrid(float(prices.max()))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True)
class TraceRecord:
    n: int
    n_nodes: int
    mean_approx_error: float
    mean_prediction_error: float


@dataclass
class SelectionTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: Literal["converged", "cap-reached", "running"] = "running"

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]


def select_nodes(
    panel: CurvePanel,
    w: WeightSpec,
    r: float,
    dist: ReferenceDistribution,
    n_start: int = 1,
    n_cap: int = 512,
    step: int = 1,
    sample: Literal["quantile", "random"] = "quantile",
    seed: int = 0,
    workers: int | None = 1,
) -> tuple[NodeSet, SelectionTrace]:
    """Grow the grid until it beats the naive day-lag forecast on training data.

    Both means run over the training slots that have a curve 24 hours
    earlier. Returns the first grid whose mean approximation error is below
    the mean prediction error (status ``converged``); otherwise, after trying
    ``n_cap``, the grid with the lowest error (status ``cap-reached``).

    Raises:
        DegenerateIntervalError: a grid has an empty cell; ``n_nodes`` names
            the nominal size being tried.
    """
    if n_start < 1 or n_cap < n_start or step < 1:
        raise ValueError("need 1 <= n_start <= n_cap and step >= 1")
    slots = naive_pairs(panel, "train")
    p_bar = mean_prediction_error(panel, w, r, window="train", workers=workers)
    curves = [panel.curves[t] for t in slots]
    rng = SplitMix64(seed) if sample == "random" else None

    trace = SelectionTrace()
    seen: dict[NodeSet, float] = {}
    best: tuple[float, NodeSet] | None = None
    for n in range(n_start, n_cap + 1, step):
        nodes = quantile_nodes(dist, n, sample, rng)
        if nodes not in seen:
            try:
                seen[nodes] = mean_approx_error(curves, nodes, w, r, workers)
            except DegenerateIntervalError as err:
                raise err.with_n(n) from err
        l_bar = seen[nodes]
        trace.records.append(TraceRecord(n, len(nodes), l_bar, p_bar))
        log.debug("n=%d nodes=%d mean approx %.6g vs naive %.6g", n, len(nodes), l_bar, p_bar)
        if best is None or l_bar < best[0]:
            best = (l_bar, nodes)
        if l_bar < p_bar:
            trace.status = "converged"
            return nodes, trace
    trace.status = "cap-reached"
    return best[1], trace
