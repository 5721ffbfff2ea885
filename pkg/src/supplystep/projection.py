"""Fitting supply curves on a fixed price grid with single-step bases.

Two equivalent bases are used on a node set ``0 = p_1 < ... < p_n``:

* ``phi_i(p) = 1{p >= p_i}``, cumulative steps; coefficients are jump sizes.
* ``theta_i(p) = 1{p_i <= p < p_{i+1}}`` with ``p_{n+1} = inf``; coefficients
  are levels.

Level ``i`` is the sum of the first ``i`` jumps. Under a weighted L2 loss the
optimal level on each cell is the W-weighted average of the curve over that
cell, which gives the closed form used by :func:`project_l2`. For other
exponents the cells decouple and :func:`fit_lr` solves one scalar convex
problem per cell.

All integrals are exact: the curve is piecewise constant and the weight is
only ever integrated through its tail mass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curve_model import StepCurve, evaluate, merge_breakpoints
from .weighting import INF, WeightSpec


class DegenerateIntervalError(ValueError):
    """A cell between two consecutive nodes carries no weight mass.

    ``index`` is the 1-based position of the cell's left node. ``n_nodes`` is
    filled in by the selection loop with the nominal grid size it was trying.
    """

    def __init__(self, index: int, price: float, n_nodes: int | None = None):
        self.index = index
        self.price = price
        self.n_nodes = n_nodes
        super().__init__(self._message())

    def _message(self):
        msg = f"degenerate interval: cell {self.index} starting at price {self.price!r} has zero weight mass"
        if self.n_nodes is not None:
            msg += f" (node count n={self.n_nodes})"
        return msg

    def with_n(self, n_nodes: int) -> DegenerateIntervalError:
        return DegenerateIntervalError(self.index, self.price, n_nodes)


class UnconstrainedTailWarning(UserWarning):
    """The last node sits where the weight vanishes; its jump is set to 0."""


@dataclass(frozen=True)
class NodeSet:
    """Price grid ``0 = p_1 < p_2 < ... < p_n``."""

    prices: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float).reshape(-1)
        if prices.size == 0:
            raise ValueError("a node set needs at least one node")
        if prices[0] != 0:
            raise ValueError("the first node must be exactly 0")
        if not np.all(np.isfinite(prices)):
            raise ValueError("node prices must be finite")
        if np.any(np.diff(prices) <= 0):
            raise ValueError("node prices must be strictly increasing")
        prices.flags.writeable = False
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return int(self.prices.size)

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return np.array_equal(self.prices, other.prices)

    def __hash__(self):
        return hash(self.prices.tobytes())

    def upper(self) -> np.ndarray:
        """Right ends of the cells, the last one being infinite."""
        return np.concatenate((self.prices[1:], [INF]))


@dataclass(frozen=True)
class Approximation:
    nodes: NodeSet
    phi_coeffs: np.ndarray
    theta_coeffs: np.ndarray
    loss: float
    r: float

    def __post_init__(self):
        n = len(self.nodes)
        for name in ("phi_coeffs", "theta_coeffs"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != n:
                raise ValueError(f"{name} has {arr.size} entries for {n} nodes")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _segments(curve: StepCurve):
    """Constant pieces of ``curve`` on [0, inf) as (starts, ends, values)."""
    prices, values = curve.prices, curve.values
    if prices.size and prices[0] == 0:
        starts, vals = prices, values
    else:
        starts = np.concatenate(([0.0], prices))
        vals = np.concatenate(([0.0], values))
    ends = np.concatenate((starts[1:], [INF]))
    return starts, ends, vals


def _cell_masses(curve: StepCurve, nodes: NodeSet, w: WeightSpec):
    """Weight mass of every curve segment inside every node cell.

    Returns ``(values, mass, cell_mass)`` where ``mass[i, s]`` is the mass of
    segment ``s`` within cell ``i`` and ``cell_mass[i]`` the mass of cell ``i``.
    """
    starts, ends, vals = _segments(curve)
    lo_node, hi_node = nodes.prices, nodes.upper()
    lo = np.maximum(starts[None, :], lo_node[:, None])
    hi = np.maximum(np.minimum(ends[None, :], hi_node[:, None]), lo)
    mass = np.asarray(w.interval_mass(lo, hi), dtype=float).reshape(lo.shape)
    cell_mass = np.asarray(w.interval_mass(lo_node, hi_node), dtype=float).reshape(-1)
    return vals, mass, cell_mass


def _check_cells(nodes: NodeSet, cell_mass: np.ndarray) -> bool:
    """Raise on an empty interior cell; return whether the last cell has mass."""
    empty = np.flatnonzero(cell_mass[:-1] <= 0)
    if empty.size:
        i = int(empty[0])
        raise DegenerateIntervalError(i + 1, float(nodes.prices[i]))
    if cell_mass[-1] > 0:
        return True
    if len(nodes) == 1:
        raise DegenerateIntervalError(1, 0.0)
    warnings.warn(
        f"last node {nodes.prices[-1]!r} lies outside the weight's support; its jump is set to 0",
        UnconstrainedTailWarning,
        stacklevel=3,
    )
    return False


def weighted_integrals(curve: StepCurve, nodes: NodeSet, w: WeightSpec):
    """Tail integrals ``CW_j = int_{p_j}^inf C W`` and ``Wt_j = int_{p_j}^inf W``.

    Both are returned as float arrays of length ``len(nodes)``.
    """
    vals, mass, _ = _cell_masses(curve, nodes, w)
    per_cell = [math.fsum(row) for row in vals[None, :] * mass]
    cw = np.array([math.fsum(per_cell[j:]) for j in range(len(per_cell))])
    wt = np.asarray(w.tail_mass(nodes.prices), dtype=float).reshape(-1)
    return cw, wt


def _cell_levels(curve: StepCurve, nodes: NodeSet, w: WeightSpec) -> np.ndarray:
    """Weighted cell averages, anchored at the curve value at each node.

    Writing the average as ``C(p_i) + sum (v_s - C(p_i)) * share_s`` keeps it
    exactly inside ``[C(p_i), C(p_{i+1}-)]`` in floating point, so consecutive
    levels never decrease through rounding.
    """
    vals, mass, cell_mass = _cell_masses(curve, nodes, w)
    has_tail = _check_cells(nodes, cell_mass)
    n = len(nodes)
    base = np.atleast_1d(evaluate(curve, nodes.prices))
    denom = np.where(cell_mass > 0, cell_mass, 1.0)
    share = np.clip(mass / denom[:, None], 0.0, 1.0)
    excess = np.clip(vals[None, :] - base[:, None], 0.0, None) * share
    levels = base + excess.sum(axis=1)
    top = np.atleast_1d(evaluate(curve, np.nextafter(nodes.upper(), -INF)))
    levels = np.minimum(levels, top)
    if not has_tail:
        levels[n - 1] = levels[n - 2]
    return levels


def theta_l2_coeffs(curve: StepCurve, nodes: NodeSet, w: WeightSpec) -> np.ndarray:
    """Level coefficients from the ratio of cell integrals.

    ``c*_i = (CW_i - CW_{i+1}) / (Wt_i - Wt_{i+1})``, with the differences of
    tail integrals evaluated directly as cell integrals.
    """
    vals, mass, cell_mass = _cell_masses(curve, nodes, w)
    has_tail = _check_cells(nodes, cell_mass)
    num = np.array([math.fsum(row) for row in vals[None, :] * mass])
    out = num / np.where(cell_mass > 0, cell_mass, 1.0)
    if not has_tail:
        out[-1] = out[-2]
    return out


def project_l2(curve: StepCurve, nodes: NodeSet, w: WeightSpec) -> Approximation:
    """Closed-form weighted least-squares fit of ``curve`` on ``nodes``.

    The jump coefficients are ``c_1 = L_1`` and ``c_i = L_i - L_{i-1}`` where
    ``L_i`` is the W-weighted average of the curve over cell ``i``. Because the
    curve is non-decreasing every ``c_i`` is non-negative, so the fit is itself
    a supply curve.

    If the last node lies beyond the support of a bounded weight, the last
    jump does not affect the loss and is set to 0 (an
    :class:`UnconstrainedTailWarning` is emitted).

    Raises:
        DegenerateIntervalError: some interior cell has zero weight mass.
    """
    levels = _cell_levels(curve, nodes, w)
    jumps = np.diff(levels, prepend=0.0)
    approx = Approximation(nodes, jumps, levels, 0.0, 2.0)
    return _with_loss(curve, approx, w)


def fit_lr(curve: StepCurve, nodes: NodeSet, w: WeightSpec, r: float) -> Approximation:
    """Fit minimising ``int |C - C_hat|^r W`` for ``r >= 1``.

    Each cell is solved on its own. ``r == 1`` takes the weighted median of
    the curve's values on the cell (lower median on ties); ``r > 1`` finds the
    root of the derivative of the convex cell objective by Brent's method,
    bracketed by the smallest and largest value of the curve on the cell.
    """
    r = float(r)
    if not r > 0:
        raise ValueError(f"loss exponent must be positive, got {r}")
    if r < 1:
        raise ValueError("non-convex exponent unsupported (0 < r < 1)")
    vals, mass, cell_mass = _cell_masses(curve, nodes, w)
    has_tail = _check_cells(nodes, cell_mass)
    n = len(nodes)
    levels = np.empty(n)
    for i in range(n if has_tail else n - 1):
        levels[i] = cell_minimizer(vals, mass[i], r)
    if not has_tail:
        levels[n - 1] = levels[n - 2]
    # per-cell minimisers lie in ordered value ranges; guard rounding only
    levels = np.maximum.accumulate(levels)
    jumps = np.diff(levels, prepend=0.0)
    approx = Approximation(nodes, jumps, levels, 0.0, r)
    return _with_loss(curve, approx, w)


def cell_minimizer(values: np.ndarray, masses: np.ndarray, r: float) -> float:
    """Minimiser of ``sum_s masses[s] * |values[s] - c|^r`` for sorted values."""
    keep = masses > 0
    v = values[keep]
    m = masses[keep]
    if v.size == 0:
        raise ValueError("cell has no weight mass")
    if v[0] == v[-1]:
        return float(v[0])
    if r == 1:
        cum = np.cumsum(m)
        return float(v[np.searchsorted(cum, cum[-1] / 2, side="left")])
    lo, span = float(v[0]), float(v[-1] - v[0])
    u = (v - lo) / span
    mw = m / m.sum()

    def slope(x):
        d = x - u
        return float(np.sum(mw * np.sign(d) * np.abs(d) ** (r - 1)))

    x = brentq(slope, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return min(max(lo + x * span, lo), float(v[-1]))


def fit(curve: StepCurve, nodes: NodeSet, w: WeightSpec, r: float = 2.0) -> Approximation:
    """Closed form for ``r == 2``, per-cell search otherwise."""
    if r == 2:
        return project_l2(curve, nodes, w)
    return fit_lr(curve, nodes, w, r)


def reconstruct(approx: Approximation) -> StepCurve:
    """The fitted step function, with knots at nodes carrying a positive jump."""
    keep = approx.phi_coeffs > 0
    return StepCurve(approx.nodes.prices[keep], approx.theta_coeffs[keep])


def curve_distance(a: StepCurve, b: StepCurve, w: WeightSpec, r: float) -> float:
    """Exact ``int_0^inf |a(p) - b(p)|^r W(p) dp`` for two step curves."""
    bps = merge_breakpoints(a, b)
    ends = np.concatenate((bps[1:], [INF]))
    gap = np.abs(np.atleast_1d(evaluate(a, bps)) - np.atleast_1d(evaluate(b, bps)))
    mass = np.atleast_1d(w.interval_mass(bps, ends))
    hit = gap > 0
    return math.fsum((gap[hit] ** r) * mass[hit])


def loss(curve: StepCurve, approx: Approximation, w: WeightSpec, r: float | None = None) -> float:
    """``int |C - C_hat|^r W`` for a fitted approximation (default: its own r)."""
    return curve_distance(curve, reconstruct(approx), w, approx.r if r is None else r)


def _with_loss(curve, approx, w):
    return Approximation(
        approx.nodes,
        approx.phi_coeffs,
        approx.theta_coeffs,
        loss(curve, approx, w),
        approx.r,
    )
