"""Brute-force reference computations used to cross-check the closed forms.

These deliberately avoid the tail-mass machinery: losses are midpoint
Riemann sums of the weight density on a fine grid, and per-cell fits are
exhaustive scans over candidate constants. They are slow by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve_model import StepCurve, evaluate
from .projection import NodeSet
from .weighting import ExponentialWeight, TruncatedUniformWeight, WeightSpec

_CHUNK = 1 << 20


@dataclass(frozen=True)
class OracleConfig:
    step: float = 1e-3
    p_cut: float | None = None
    scan_step: float = 1e-4

    def __post_init__(self):
        if not self.step > 0 or not self.scan_step > 0:
            raise ValueError("oracle steps must be positive")
        if self.p_cut is not None and not self.p_cut > 0:
            raise ValueError("p_cut must be positive")


def truncation_price(w: WeightSpec, *curves: StepCurve, cfg: OracleConfig | None = None) -> float:
    """A price beyond every knot where the remaining weight is negligible.

    For the exponential weight the cut sits ``ln(1e10) / rate`` past the last
    knot of any curve given. Beyond that knot the integrand is constant, so
    the dropped tail is at most 1e-10 of the loss, however small the loss.
    """
    knots = [c.prices[-1] for c in curves if c.n_steps]
    if cfg is not None and cfg.p_cut is not None:
        p_cut = cfg.p_cut
    elif isinstance(w, TruncatedUniformWeight):
        p_cut = w.p_max
    elif isinstance(w, ExponentialWeight):
        p_cut = max([0.0, *knots]) + math.log(1e10) / w.rate
    else:
        raise TypeError(f"unsupported weight {w!r}")
    return max([p_cut, *knots])


def riemann_loss(
    curve: StepCurve,
    other: StepCurve,
    w: WeightSpec,
    r: float,
    cfg: OracleConfig = OracleConfig(),
) -> float:
    """Midpoint-rule value of ``int_0^P |curve - other|^r W`` with ``P = p_cut``."""
    p_cut = truncation_price(w, curve, other, cfg=cfg)
    # whole cells of exactly ``step`` keep knots on cell edges
    cells = int(math.ceil(p_cut / cfg.step - 1e-9))
    h = cfg.step
    total = []
    for start in range(0, cells, _CHUNK):
        k = np.arange(start, min(start + _CHUNK, cells), dtype=float)
        mid = (k + 0.5) * h
        gap = np.abs(evaluate(curve, mid) - evaluate(other, mid))
        total.append(math.fsum(gap**r * w.density(mid)) * h)
    return math.fsum(total)


def _cell_pieces(curve: StepCurve, lo: float, hi: float, w: WeightSpec):
    """Values of ``curve`` on [lo, hi) with their weight masses, from the density.

    Masses come from a midpoint rule on each constant piece so that this path
    shares nothing with the tail-mass formulas.
    """
    # split at the end of the support too, where the density jumps to zero
    cuts = np.concatenate((curve.prices, [w.support_end()]))
    inner = np.unique(cuts[(cuts > lo) & (cuts < hi)])
    edges = np.concatenate(([lo], inner, [hi]))
    values = np.atleast_1d(evaluate(curve, edges[:-1]))
    masses = np.array([_density_mass(w, a, b) for a, b in zip(edges[:-1], edges[1:])])
    return values, masses


def _density_mass(w: WeightSpec, a: float, b: float, cells: int = 4000) -> float:
    if b <= a:
        return 0.0
    h = (b - a) / cells
    mid = a + (np.arange(cells) + 0.5) * h
    return math.fsum(w.density(mid)) * h


def grid_fit(
    curve: StepCurve,
    nodes: NodeSet,
    w: WeightSpec,
    r: float,
    cfg: OracleConfig = OracleConfig(),
) -> np.ndarray:
    """Per-cell constants found by exhaustive scan.

    Candidates are every curve value on the cell plus a uniform grid of
    spacing ``scan_step`` between the smallest and largest of them. The cell
    objective is evaluated exactly for each candidate given the piece masses.
    """
    p_cut = truncation_price(w, curve, cfg=cfg)
    bounds = np.concatenate((nodes.prices, [max(p_cut, nodes.prices[-1])]))
    out = np.empty(len(nodes))
    for i in range(len(nodes)):
        values, masses = _cell_pieces(curve, bounds[i], bounds[i + 1], w)
        keep = masses > 0
        if not keep.any():
            out[i] = out[i - 1] if i else 0.0
            continue
        values, masses = values[keep], masses[keep]
        lo, hi = values.min(), values.max()
        grid = np.arange(lo, hi + cfg.scan_step, cfg.scan_step)
        cand = np.unique(np.concatenate((values, grid[grid <= hi])))
        best_val, best_obj = lo, math.inf
        for start in range(0, cand.size, _CHUNK // max(1, values.size)):
            c = cand[start : start + _CHUNK // max(1, values.size)]
            obj = (np.abs(c[:, None] - values[None, :]) ** r * masses[None, :]).sum(axis=1)
            j = int(np.argmin(obj))
            if obj[j] < best_obj:
                best_obj, best_val = float(obj[j]), float(c[j])
        out[i] = best_val
    return out


def cell_objective(curve: StepCurve, nodes: NodeSet, w: WeightSpec, r: float, levels) -> np.ndarray:
    """Density-based per-cell objective of the given levels (oracle side)."""
    p_cut = truncation_price(w, curve)
    bounds = np.concatenate((nodes.prices, [max(p_cut, nodes.prices[-1])]))
    out = np.empty(len(nodes))
    for i in range(len(nodes)):
        values, masses = _cell_pieces(curve, bounds[i], bounds[i + 1], w)
        out[i] = math.fsum(np.abs(values - levels[i]) ** r * masses)
    return out
