"""Method x grid-size comparison of mean scaled approximation errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .evaluation import CurvePanel, mean_approx_error, mean_prediction_error, scale_panel
from .node_selection import METHODS, build_distribution, quantile_nodes
from .weighting import TruncatedUniformWeight, WeightSpec

DEFAULT_NODE_COUNTS = (5, 10, 15, 20)


@dataclass(frozen=True)
class ReportRow:
    method: str
    n: int
    mscape: float


@dataclass
class ErrorReport:
    rows: list[ReportRow] = field(default_factory=list)
    naive_mscape: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.naive_mscape < 0 or any(row.mscape < 0 for row in self.rows):
            raise ValueError("errors must be non-negative")

    def lookup(self, method: str, n: int) -> float:
        for row in self.rows:
            if row.method == method and row.n == n:
                return row.mscape
        raise KeyError((method, n))


def comparison_report(
    panel: CurvePanel,
    methods: Sequence[str] = METHODS,
    node_counts: Sequence[int] = DEFAULT_NODE_COUNTS,
    w: WeightSpec | None = None,
    r: float = 2.0,
    q_level: float = 0.75,
    scale: bool = True,
    workers: int | None = 1,
) -> ErrorReport:
    """Fit every test curve on grids built from the training data.

    The panel is first scaled by its largest training quantity (unless
    ``scale`` is false). For each method and grid size the grid comes from
    the training bids only; the reported error is the mean loss over test
    curves. The naive baseline is the mean day-lag error over test slots.
    ``w`` defaults to a flat weight up to the highest training price.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    factor = 1.0
    if scale:
        panel, factor = scale_panel(panel)
    if w is None:
        w = TruncatedUniformWeight(panel.max_price("train"))
    test = [panel.curves[t] for t in panel.test_timestamps()]
    if not test:
        raise ValueError("panel has no test curves")

    report = ErrorReport(scale=factor)
    report.naive_mscape = mean_prediction_error(panel, w, r, window="test", workers=workers)
    for method in methods:
        dist = build_distribution(method, panel, q_level)
        for n in node_counts:
            nodes = quantile_nodes(dist, n)
            err = mean_approx_error(test, nodes, w, r, workers)
            report.rows.append(ReportRow(method, int(n), err))
    return report
