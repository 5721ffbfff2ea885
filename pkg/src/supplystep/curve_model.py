"""Supply curves as right-continuous step functions of price."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DECIMALS = 2


@dataclass(frozen=True)
class Bid:
    """A single (price, quantity) offer for one delivery hour."""

    timestamp: datetime
    price: float
    quantity: float

    def __post_init__(self):
        if not self.price >= 0:
            raise ValueError(f"bid price must be >= 0, got {self.price}")
        if not self.quantity > 0:
            raise ValueError(f"bid quantity must be > 0, got {self.quantity}")
        ts = self.timestamp
        if ts.minute or ts.second or ts.microsecond:
            raise ValueError(f"bid timestamp {ts.isoformat()} is not on an hour boundary")


def price_to_ticks(price, decimals: int = DEFAULT_DECIMALS) -> int:
    """Round a price to an integer number of ``10**-decimals`` units.

    Floats go through ``str`` so that ``0.1`` maps to 10 cents rather than to
    its binary expansion.
    """
    d = price if isinstance(price, Decimal) else Decimal(str(price))
    return int(d.scaleb(decimals).to_integral_value(rounding=ROUND_HALF_EVEN))


def ticks_to_price(ticks: int, decimals: int = DEFAULT_DECIMALS) -> float:
    return ticks / 10**decimals


class StepCurve:
    """Non-decreasing, right-continuous step function of price.

    The value at ``p`` is the value of the last knot whose price is <= ``p``,
    and 0 before the first knot. A curve with no knots is the zero function;
    it only arises from reconstructing an all-zero approximation.

    Instances are immutable: the knot arrays are read-only.
    """

    __slots__ = ("_prices", "_values")

    def __init__(self, prices: Sequence[float], values: Sequence[float]):
        prices = np.array(prices, dtype=float).reshape(-1)
        values = np.array(values, dtype=float).reshape(-1)
        if prices.shape != values.shape:
            raise ValueError("prices and values must have the same length")
        if prices.size:
            if not np.all(np.isfinite(prices)) or not np.all(np.isfinite(values)):
                raise ValueError("knots must be finite")
            if prices[0] < 0:
                raise ValueError("knot prices must be >= 0")
            if values[0] <= 0:
                raise ValueError("knot values must be > 0")
            if np.any(np.diff(prices) <= 0):
                raise ValueError("knot prices must be strictly increasing")
            if np.any(np.diff(values) <= 0):
                raise ValueError("knot values must be strictly increasing")
        prices.flags.writeable = False
        values.flags.writeable = False
        self._prices = prices
        self._values = values

    @classmethod
    def zero(cls) -> StepCurve:
        return cls([], [])

    @property
    def prices(self) -> np.ndarray:
        return self._prices

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_steps(self) -> int:
        return int(self._prices.size)

    @property
    def total(self) -> float:
        """Value beyond the last knot (total offered quantity)."""
        return float(self._values[-1]) if self._values.size else 0.0

    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self._prices.tolist(), self._values.tolist()))

    def scaled(self, factor: float) -> StepCurve:
        """Return the curve with every value divided by ``factor``."""
        return StepCurve(self._prices, self._values / factor)

    def __call__(self, p):
        return evaluate(self, p)

    def __eq__(self, other):
        if not isinstance(other, StepCurve):
            return NotImplemented
        return np.array_equal(self._prices, other._prices) and np.array_equal(
            self._values, other._values
        )

    def __hash__(self):
        return hash((self._prices.tobytes(), self._values.tobytes()))

    def __repr__(self):
        return f"StepCurve({self.knots()!r})"


def build_curve(bids: Iterable[Bid], decimals: int = DEFAULT_DECIMALS) -> StepCurve:
    """Aggregate the bids of one hour into a supply curve.

    Bids are sorted by price, bids at the same price (after rounding to
    ``decimals`` places) are merged, and knot values are the running sum of
    quantities.

    Raises:
        ValueError: "empty hour" for no bids, "mixed hours" when the bids do
            not share one timestamp.
    """
    bids = list(bids)
    if not bids:
        raise ValueError("empty hour")
    ts = bids[0].timestamp
    if any(b.timestamp != ts for b in bids):
        raise ValueError("mixed hours")
    return curve_from_pairs(
        [b.price for b in bids], [b.quantity for b in bids], decimals=decimals
    )


def curve_from_pairs(prices, quantities, decimals: int = DEFAULT_DECIMALS) -> StepCurve:
    """Same aggregation as :func:`build_curve` on bare price/quantity arrays."""
    if len(prices) == 0:
        raise ValueError("empty hour")
    merged: dict[int, float] = {}
    for p, q in zip(prices, quantities):
        if not p >= 0 or not q > 0:
            raise ValueError(f"invalid bid (price={p}, quantity={q})")
        t = price_to_ticks(p, decimals)
        merged[t] = merged.get(t, 0.0) + float(q)
    ticks = sorted(merged)
    values = np.cumsum([merged[t] for t in ticks])
    return StepCurve([ticks_to_price(t, decimals) for t in ticks], values)


def evaluate(curve: StepCurve, p):
    """Value of the curve at price(s) ``p``. Accepts scalars or arrays."""
    idx = np.searchsorted(curve.prices, p, side="right")
    padded = np.concatenate(([0.0], curve.values))
    out = padded[idx]
    return float(out) if np.ndim(out) == 0 else out


def merge_breakpoints(a: StepCurve, b: StepCurve) -> np.ndarray:
    """Sorted union of both curves' knot prices together with price 0."""
    return np.unique(np.concatenate(([0.0], a.prices, b.prices)))
