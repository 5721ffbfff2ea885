"""Hourly curve panels, naive day-lag errors and mean approximation errors."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

import numpy as np

from .curve_model import StepCurve
from .projection import NodeSet, curve_distance, fit
from .weighting import WeightSpec

log = logging.getLogger(__name__)

DAY_LAG = timedelta(hours=24)

T = TypeVar("T")
R = TypeVar("R")


class NoNaivePairsError(ValueError):
    """No slot in the window has a curve 24 hours earlier."""


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int | None = 1) -> list[R]:
    """Ordered map; results come back in input order whatever ``workers`` is."""
    items = list(items)
    if not workers or workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def exact_mean(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("mean of an empty set")
    # fsum is correctly rounded, so the reduction order cannot matter
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class CurvePanel:
    """Hourly supply curves with a train/test boundary.

    ``train_end`` is the first test timestamp; slots before it are training
    data. ``None`` means everything is training. ``bids`` optionally keeps the
    raw (price, quantity) pairs of each hour as ``(k, 2)`` arrays, which the
    empirical node distributions need.
    """

    curves: Mapping[datetime, StepCurve]
    train_end: datetime | None = None
    bids: Mapping[datetime, np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        ordered = dict(sorted(self.curves.items()))
        if len(ordered) != len(self.curves):
            raise ValueError("duplicate timestamps")
        object.__setattr__(self, "curves", ordered)
        if self.bids is not None:
            object.__setattr__(self, "bids", dict(sorted(self.bids.items())))

    def __len__(self):
        return len(self.curves)

    def timestamps(self) -> list[datetime]:
        return list(self.curves)

    def is_train(self, t: datetime) -> bool:
        return self.train_end is None or t < self.train_end

    def train_timestamps(self) -> list[datetime]:
        return [t for t in self.curves if self.is_train(t)]

    def test_timestamps(self) -> list[datetime]:
        return [t for t in self.curves if not self.is_train(t)]

    def window(self, name: str) -> list[datetime]:
        if name == "train":
            return self.train_timestamps()
        if name == "test":
            return self.test_timestamps()
        if name == "all":
            return self.timestamps()
        raise ValueError(f"unknown window {name!r}")

    def with_split(self, train_end: datetime | None) -> CurvePanel:
        return CurvePanel(self.curves, train_end, self.bids)

    def with_train_days(self, days: int) -> CurvePanel:
        """Split so that the first ``days`` calendar days (from the first slot) are training."""
        if not self.curves:
            raise ValueError("empty panel")
        first = next(iter(self.curves))
        start = first.replace(hour=0, minute=0, second=0, microsecond=0)
        return self.with_split(start + timedelta(days=days))

    def bid_pairs(self, window: str = "train") -> tuple[np.ndarray, np.ndarray]:
        """All (price, quantity) bids of a window.

        Without raw bids, each knot's jump stands in for the bids merged at
        that price.
        """
        prices, quantities = [], []
        for t in self.window(window):
            if self.bids is not None and t in self.bids:
                pairs = self.bids[t]
                prices.append(pairs[:, 0])
                quantities.append(pairs[:, 1])
            else:
                c = self.curves[t]
                prices.append(c.prices)
                quantities.append(np.diff(c.values, prepend=0.0))
        if not prices:
            return np.empty(0), np.empty(0)
        return np.concatenate(prices), np.concatenate(quantities)

    def max_price(self, window: str = "train") -> float:
        prices, _ = self.bid_pairs(window)
        if prices.size == 0:
            raise ValueError(f"no bids in the {window} window")
        return float(prices.max())


def naive_pairs(panel: CurvePanel, window: str = "train") -> list[datetime]:
    """Slots of ``window`` whose curve 24 hours earlier is available.

    For the training window the lagged curve must itself be training data.
    Slots whose lagged hour is missing although it falls inside the panel's
    span (DST gaps, data holes) are skipped and counted in a warning.
    """
    slots = panel.window(window)
    if not slots:
        return []
    first = next(iter(panel.curves))
    out, missing = [], 0
    for t in slots:
        lag = t - DAY_LAG
        if lag in panel.curves and (window != "train" or panel.is_train(lag)):
            out.append(t)
        elif lag >= first:
            missing += 1
    if missing:
        log.warning("skipped %d %s slot(s) with no curve 24h earlier", missing, window)
    return out


def naive_prediction_error(panel: CurvePanel, t: datetime, w: WeightSpec, r: float = 2.0) -> float | None:
    """``int |C_t - C_{t-24h}|^r W``, or ``None`` if either curve is missing."""
    cur = panel.curves.get(t)
    prev = panel.curves.get(t - DAY_LAG)
    if cur is None or prev is None:
        return None
    return curve_distance(cur, prev, w, r)


def mean_prediction_error(
    panel: CurvePanel,
    w: WeightSpec,
    r: float = 2.0,
    window: str = "train",
    workers: int | None = 1,
) -> float:
    """Average naive day-lag error over the valid slots of ``window``.

    Raises:
        NoNaivePairsError: no slot has its lagged curve.
    """
    slots = naive_pairs(panel, window)
    if not slots:
        raise NoNaivePairsError(f"no (t, t-24h) pairs in the {window} window")
    errors = parallel_map(lambda t: naive_prediction_error(panel, t, w, r), slots, workers)
    return exact_mean(errors)


def approximation_errors(
    curves: Sequence[StepCurve],
    nodes: NodeSet,
    w: WeightSpec,
    r: float = 2.0,
    workers: int | None = 1,
) -> list[float]:
    return parallel_map(lambda c: fit(c, nodes, w, r).loss, curves, workers)


def mean_approx_error(
    curves: Sequence[StepCurve],
    nodes: NodeSet,
    w: WeightSpec,
    r: float = 2.0,
    workers: int | None = 1,
) -> float:
    """Average fitted loss of ``curves`` on ``nodes``."""
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to approximate")
    return exact_mean(approximation_errors(curves, nodes, w, r, workers))


def scale_panel(panel: CurvePanel) -> tuple[CurvePanel, float]:
    """Divide all quantities by the largest training-curve value.

    Prices are untouched. Raw bids, when present, are scaled the same way.
    """
    train = panel.train_timestamps()
    if not train:
        raise ValueError("empty training set")
    scale = max(panel.curves[t].total for t in train)
    if not scale > 0:
        raise ValueError("training curves are all zero")
    curves = {t: c.scaled(scale) for t, c in panel.curves.items()}
    bids = None
    if panel.bids is not None:
        bids = {t: np.column_stack((b[:, 0], b[:, 1] / scale)) for t, b in panel.bids.items()}
    return CurvePanel(curves, panel.train_end, bids), scale
