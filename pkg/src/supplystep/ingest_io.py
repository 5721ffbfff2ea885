"""CSV input/output and seeded synthetic market data.

File formats (UTF-8, ``.`` decimal separator):

* bids: header ``timestamp,price,quantity``; ISO-8601 hour timestamps.
* curves: header ``timestamp,price,value``, one row per knot.
* node set: ``# supplystep nodeset v1`` then header ``price``.
* approximation: ``# supplystep approximation v1``, ``# r=...``,
  ``# loss=...`` then header ``node,phi,theta``.
* selection trace: ``# status=...`` then
  ``n,n_nodes,mean_approx_error,mean_prediction_error``.
* report: ``# naive_mscape=...``, ``# scale=...`` then ``method,n,mscape``,
  with errors multiplied by 1000 and written to 6 significant digits.

Floats other than report values are written with ``repr`` so they read back
bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import io
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from typing import TextIO

import numpy as np

from .curve_model import DEFAULT_DECIMALS, StepCurve, curve_from_pairs
from .evaluation import CurvePanel
from .node_selection import SelectionTrace, TraceRecord
from .projection import Approximation, NodeSet
from .report import ErrorReport, ReportRow
from .rng import SplitMix64

BID_HEADER = ["timestamp", "price", "quantity"]
CURVE_HEADER = ["timestamp", "price", "value"]
NODESET_TAG = "# supplystep nodeset v1"
APPROX_TAG = "# supplystep approximation v1"
TRACE_HEADER = ["n", "n_nodes", "mean_approx_error", "mean_prediction_error"]
REPORT_HEADER = ["method", "n", "mscape"]


class BidFormatError(ValueError):
    """Malformed bid file; ``line`` is 1-based and counts the header."""

    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class ArtifactFormatError(ValueError):
    """A persisted artifact has the wrong version tag or fields."""


def parse_hour(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip())
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {text!r} is not on an hour boundary")
    return ts


def format_hour(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M")


def _decimal(text: str, what: str) -> Decimal:
    try:
        d = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"bad {what} {text!r}") from None
    if not d.is_finite():
        raise ValueError(f"bad {what} {text!r}")
    return d


# -- bids ---------------------------------------------------------------------


def read_bids(path, decimals: int = DEFAULT_DECIMALS, train_end: datetime | None = None) -> CurvePanel:
    """Parse a bid CSV into a panel with one curve per hour.

    Raises:
        BidFormatError: bad header, malformed row (with its line number) or
            an empty file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_bids(fh, decimals, train_end)


def parse_bids(fh: TextIO, decimals: int = DEFAULT_DECIMALS, train_end: datetime | None = None) -> CurvePanel:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise BidFormatError(1, "empty file")
    if [h.strip() for h in header] != BID_HEADER:
        raise BidFormatError(1, f"expected header {','.join(BID_HEADER)}")
    hours: dict[datetime, list[tuple[float, float]]] = defaultdict(list)
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise BidFormatError(line, f"expected 3 fields, got {len(row)}")
        try:
            ts = parse_hour(row[0])
            price = _decimal(row[1], "price")
            quantity = _decimal(row[2], "quantity")
        except ValueError as err:
            raise BidFormatError(line, str(err)) from None
        if price < 0:
            raise BidFormatError(line, f"price must be >= 0, got {row[1].strip()}")
        if quantity <= 0:
            raise BidFormatError(line, f"quantity must be > 0, got {row[2].strip()}")
        hours[ts].append((float(price), float(quantity)))
    if not hours:
        raise BidFormatError(reader.line_num or 1, "no bid rows")
    curves, bids = {}, {}
    for ts, pairs in hours.items():
        arr = np.array(pairs, dtype=float)
        curves[ts] = curve_from_pairs(arr[:, 0], arr[:, 1], decimals)
        bids[ts] = arr
    return CurvePanel(curves, train_end, bids)


def write_bids(path, panel: CurvePanel, decimals: int = DEFAULT_DECIMALS) -> None:
    if panel.bids is None:
        raise ValueError("panel has no raw bids to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_bids(panel, decimals))


def format_bids(panel: CurvePanel, decimals: int = DEFAULT_DECIMALS) -> str:
    out = io.StringIO()
    out.write(",".join(BID_HEADER) + "\n")
    for ts, pairs in panel.bids.items():
        stamp = format_hour(ts)
        for price, quantity in pairs.tolist():
            out.write(f"{stamp},{price:.{decimals}f},{quantity!r}\n")
    return out.getvalue()


# -- curves -------------------------------------------------------------------


def write_curves(path, panel: CurvePanel) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CURVE_HEADER) + "\n")
        for ts, curve in panel.curves.items():
            stamp = format_hour(ts)
            for price, value in curve.knots():
                fh.write(f"{stamp},{price!r},{value!r}\n")


def read_curves(path) -> CurvePanel:
    knots: dict[datetime, list[tuple[float, float]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != CURVE_HEADER:
            raise ArtifactFormatError(f"expected header {','.join(CURVE_HEADER)}")
        for row in reader:
            if row:
                knots[parse_hour(row[0])].append((float(row[1]), float(row[2])))
    curves = {ts: StepCurve([p for p, _ in k], [v for _, v in k]) for ts, k in knots.items()}
    return CurvePanel(curves)


# -- node sets and approximations ---------------------------------------------


def _data_lines(fh: TextIO, tag: str) -> tuple[dict[str, str], list[list[str]]]:
    """Split a tagged artifact into ``# key=value`` metadata and CSV rows."""
    lines = fh.read().splitlines()
    if not lines or lines[0].strip() != tag:
        raise ArtifactFormatError(f"missing or wrong version tag; expected {tag!r}")
    meta, body = {}, []
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    return meta, list(csv.reader(body))


def write_nodes(path, nodes: NodeSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{NODESET_TAG}\nprice\n")
        for p in nodes.prices.tolist():
            fh.write(f"{p!r}\n")


def read_nodes(path) -> NodeSet:
    with open(path, encoding="utf-8") as fh:
        _, rows = _data_lines(fh, NODESET_TAG)
    if not rows or rows[0] != ["price"]:
        raise ArtifactFormatError("node set needs a 'price' column")
    return NodeSet([float(r[0]) for r in rows[1:]])


def write_approximation(path, approx: Approximation) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{APPROX_TAG}\n# r={approx.r!r}\n# loss={approx.loss!r}\nnode,phi,theta\n")
        for p, c, t in zip(approx.nodes.prices.tolist(), approx.phi_coeffs.tolist(), approx.theta_coeffs.tolist()):
            fh.write(f"{p!r},{c!r},{t!r}\n")


def read_approximation(path) -> Approximation:
    with open(path, encoding="utf-8") as fh:
        meta, rows = _data_lines(fh, APPROX_TAG)
    if not rows or rows[0] != ["node", "phi", "theta"] or not {"r", "loss"} <= meta.keys():
        raise ArtifactFormatError("approximation needs r, loss and node,phi,theta columns")
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, 3)
    return Approximation(NodeSet(data[:, 0]), data[:, 1], data[:, 2], float(meta["loss"]), float(meta["r"]))


# -- selection traces and reports ---------------------------------------------


def format_trace(trace: SelectionTrace) -> str:
    out = io.StringIO()
    out.write(f"# status={trace.status}\n{','.join(TRACE_HEADER)}\n")
    for rec in trace.records:
        out.write(f"{rec.n},{rec.n_nodes},{rec.mean_approx_error!r},{rec.mean_prediction_error!r}\n")
    return out.getvalue()


def parse_trace(text: str) -> SelectionTrace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# status="):
        raise ArtifactFormatError("trace must start with '# status=...'")
    status = lines[0].partition("=")[2].strip()
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != TRACE_HEADER:
        raise ArtifactFormatError(f"expected header {','.join(TRACE_HEADER)}")
    records = [TraceRecord(int(a), int(b), float(c), float(d)) for a, b, c, d in rows[1:]]
    return SelectionTrace(records, status)


def _sig6(x: float) -> str:
    return f"{x * 1000:.6g}"


def format_report(report: ErrorReport) -> str:
    out = io.StringIO()
    out.write(f"# naive_mscape={_sig6(report.naive_mscape)}\n")
    out.write(f"# scale={report.scale!r}\n")
    out.write(",".join(REPORT_HEADER) + "\n")
    for row in report.rows:
        out.write(f"{row.method},{row.n},{_sig6(row.mscape)}\n")
    return out.getvalue()


def parse_report(text: str) -> ErrorReport:
    meta, rows = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    table = list(csv.reader(rows))
    if not table or table[0] != REPORT_HEADER or "naive_mscape" not in meta:
        raise ArtifactFormatError("report needs '# naive_mscape=' and a method,n,mscape header")
    return ErrorReport(
        [ReportRow(m, int(n), float(v) / 1000) for m, n, v in table[1:]],
        float(meta["naive_mscape"]) / 1000,
        float(meta.get("scale", "1.0")),
    )


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- synthetic data -----------------------------------------------------------


@dataclass(frozen=True)
class PriceComponent:
    """One mixture component: bid prices and quantities uniform on ranges."""

    weight: float
    price_range: tuple[float, float]
    quantity_range: tuple[float, float]


def _default_components():
    return (
        PriceComponent(0.9, (0.0, 100.0), (1.0, 40.0)),
        PriceComponent(0.1, (100.0, 300.0), (0.5, 5.0)),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded market generator settings.

    Each hour of the day gets a base bid stack; every day perturbs each base
    bid's price and quantity by a factor uniform in ``1 +- perturbation``.
    The default mixture puts most bids below 100 with a sparse tail to 300.
    """

    seed: int = 7
    days: int = 40
    hours_per_day: int = 24
    bids_per_hour: tuple[int, int] = (20, 60)
    components: tuple[PriceComponent, ...] = field(default_factory=_default_components)
    perturbation: float = 0.1
    start: datetime = datetime(2016, 1, 1)

    def __post_init__(self):
        if self.days < 1 or self.hours_per_day < 1:
            raise ValueError("days and hours_per_day must be positive")
        lo, hi = self.bids_per_hour
        if not 1 <= lo <= hi:
            raise ValueError("bids_per_hour must satisfy 1 <= lo <= hi")
        if abs(sum(c.weight for c in self.components) - 1) > 1e-12:
            raise ValueError("component weights must sum to 1")
        for c in self.components:
            if c.weight < 0 or c.price_range[0] < 0 or c.price_range[1] < c.price_range[0]:
                raise ValueError(f"bad price component {c}")
            if not 0 < c.quantity_range[0] <= c.quantity_range[1]:
                raise ValueError(f"bad quantity range in {c}")
        if not 0 <= self.perturbation < 1:
            raise ValueError("perturbation must lie in [0, 1)")


def _round_to(x: float, places: int) -> float:
    return round(x * 10**places) / 10**places


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), decimals: int = DEFAULT_DECIMALS) -> CurvePanel:
    """Deterministic hourly bid panel; see :mod:`supplystep.rng` for the PRNG.

    Prices are rounded to ``decimals`` places and quantities to 0.1 MWh
    (never below 0.1).
    """
    rng = SplitMix64(spec.seed)
    cum = np.cumsum([c.weight for c in spec.components]).tolist()

    def draw(lo, hi):
        return lo + (hi - lo) * rng.uniform()

    base = []
    for _ in range(spec.hours_per_day):
        stack = []
        for _ in range(rng.integer(*spec.bids_per_hour)):
            u = rng.uniform()
            comp = spec.components[next((i for i, c in enumerate(cum) if u < c), len(cum) - 1)]
            stack.append((draw(*comp.price_range), draw(*comp.quantity_range)))
        base.append(stack)

    curves, bids = {}, {}
    eps = spec.perturbation
    for d in range(spec.days):
        for h in range(spec.hours_per_day):
            ts = spec.start + timedelta(days=d, hours=h)
            pairs = []
            for price, quantity in base[h]:
                fp = 1 + eps * (2 * rng.uniform() - 1)
                fq = 1 + eps * (2 * rng.uniform() - 1)
                p = _round_to(max(0.0, price * fp), decimals)
                q = max(0.1, _round_to(quantity * fq, 1))
                pairs.append((p, q))
            arr = np.array(pairs, dtype=float)
            curves[ts] = curve_from_pairs(arr[:, 0], arr[:, 1], decimals)
            bids[ts] = arr
    return CurvePanel(curves, None, bids)


def panel_checksum(panel: CurvePanel) -> str:
    return hashlib.sha256(format_bids(panel).encode()).hexdigest()
