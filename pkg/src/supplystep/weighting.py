"""Weight functions over price, handled through their tail integrals.

Every weight exposes ``tail_mass(p)``, the integral of W over ``[p, inf)``.
Integrals of step functions against W then reduce to differences of tail
masses, so no quadrature is involved anywhere in the fitting code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Upper end of unbounded intervals.
INF = math.inf


@dataclass(frozen=True)
class ExponentialWeight:
    """W(p) = exp(-rate * p)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise ValueError(f"rate must be a positive finite number, got {self.rate}")

    def density(self, p):
        return np.exp(-self.rate * np.asarray(p, dtype=float))

    def tail_mass(self, p):
        p = np.asarray(p, dtype=float)
        out = np.exp(-self.rate * p) / self.rate
        return out if out.ndim else float(out)

    def interval_mass(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        # exp(-ra) * (1 - exp(-r(b - a))) keeps relative accuracy far in the tail
        with np.errstate(invalid="ignore"):
            width = np.where(np.isinf(b), INF, b - a)
        out = np.exp(-self.rate * a) * -np.expm1(-self.rate * width) / self.rate
        out = np.where(width == 0, 0.0, out)
        return out if out.ndim else float(out)

    def support_end(self) -> float:
        return INF

    def __str__(self):
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class TruncatedUniformWeight:
    """W(p) = 1 on [0, p_max] and 0 beyond."""

    p_max: float

    def __post_init__(self):
        if not self.p_max > 0 or not math.isfinite(self.p_max):
            raise ValueError(f"p_max must be a positive finite number, got {self.p_max}")

    def density(self, p):
        p = np.asarray(p, dtype=float)
        return np.where(p <= self.p_max, 1.0, 0.0)

    def tail_mass(self, p):
        p = np.asarray(p, dtype=float)
        out = np.maximum(0.0, self.p_max - p)
        return out if out.ndim else float(out)

    def interval_mass(self, a, b):
        a = np.minimum(np.asarray(a, dtype=float), self.p_max)
        b = np.minimum(np.asarray(b, dtype=float), self.p_max)
        out = np.maximum(0.0, b - a)
        return out if out.ndim else float(out)

    def support_end(self) -> float:
        return self.p_max

    def __str__(self):
        return f"uniform:{self.p_max!r}"


WeightSpec = ExponentialWeight | TruncatedUniformWeight


def tail_mass(w: WeightSpec, p):
    """Integral of the weight over ``[p, inf)``."""
    if np.any(np.asarray(p) < 0):
        raise ValueError("price must be >= 0")
    return w.tail_mass(p)


def interval_mass(w: WeightSpec, a, b):
    """Integral of the weight over ``[a, b]``; ``b`` may be :data:`INF`."""
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(a_arr > b_arr):
        raise ValueError("inverted interval")
    if np.any(a_arr < 0):
        raise ValueError("price must be >= 0")
    return w.interval_mass(a, b)


def parse_weight(text: str, auto_p_max: float | None = None) -> WeightSpec:
    """Parse ``exp:<rate>`` or ``uniform:<p_max>`` (``uniform:auto`` allowed).

    ``auto`` resolves to ``auto_p_max``, which callers set to the largest
    observed training price.
    """
    kind, sep, arg = text.partition(":")
    if not sep:
        raise ValueError(f"bad weight spec {text!r}; expected exp:<rate> or uniform:<p_max>")
    kind = kind.strip().lower()
    arg = arg.strip()
    if kind == "exp":
        return ExponentialWeight(float(arg))
    if kind == "uniform":
        if arg == "auto":
            if auto_p_max is None:
                raise ValueError("uniform:auto needs training prices to resolve p_max")
            return TruncatedUniformWeight(float(auto_p_max))
        return TruncatedUniformWeight(float(arg))
    raise ValueError(f"unknown weight kind {kind!r}")
