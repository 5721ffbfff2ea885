"""Batch command line: ``supplystep <command> [options]``."""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import warnings
from datetime import datetime
from pathlib import Path

import numpy as np

from . import ingest_io as iox
from .curve_model import DEFAULT_DECIMALS, StepCurve
from .evaluation import (
    CurvePanel,
    NoNaivePairsError,
    mean_approx_error,
    mean_prediction_error,
    parallel_map,
    scale_panel,
)
from .node_selection import METHODS, build_distribution, quantile_nodes, select_nodes
from .oracle import OracleConfig, riemann_loss
from .projection import DegenerateIntervalError, NodeSet, UnconstrainedTailWarning, fit, reconstruct
from .report import DEFAULT_NODE_COUNTS, comparison_report
from .weighting import parse_weight

log = logging.getLogger("supplystep")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NO_NAIVE_PAIRS = 5
EXIT_DEGENERATE = 6
EXIT_INVALID = 7

EXIT_CODES_HELP = """exit codes:
  0  success
  2  usage error (unknown flag, bad value)
  3  file missing or unreadable
  4  malformed input file (bids, node set, ...)
  5  no-naive-pairs: no slot has a curve 24h earlier in the window
  6  degenerate interval: a node cell carries zero weight mass
  7  other invalid input (empty distribution, bad split, ...)
"""


class UsageError(Exception):
    pass


# -- argument helpers ---------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _hour(text: str) -> datetime:
    try:
        return iox.parse_hour(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _add_common(p: argparse.ArgumentParser, weight=True, split=False):
    p.add_argument("--bids", type=Path, required=True, help="bid CSV (timestamp,price,quantity)")
    if weight:
        p.add_argument(
            "--weight",
            default="uniform:auto",
            help="exp:<rate> or uniform:<p_max>; uniform:auto uses the highest training price (default)",
        )
        p.add_argument("--r", type=_positive_float, default=2.0, help="loss exponent, >= 1 (default 2)")
    if split:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--train-days", type=int, help="first N calendar days are training data")
        g.add_argument("--train-end", type=_hour, help="first test timestamp")
    p.add_argument("--decimals", type=int, default=DEFAULT_DECIMALS, help="price precision (default 2)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supplystep",
        description="Single-step basis approximation of electricity supply curves.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        return sub.add_parser(
            name, help=help_text, description=help_text, epilog=EXIT_CODES_HELP,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    p = add("synth", "write a seeded synthetic bid CSV")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=40)
    p.add_argument("--perturbation", type=float, default=0.1, help="day-to-day jitter (0 = identical days)")
    p.add_argument("--bids-per-hour", type=_int_list, default=[20, 60], help="lo,hi (default 20,60)")
    p.add_argument("--start", type=_hour, default=datetime(2016, 1, 1))
    p.add_argument("--out", type=Path, required=True)

    p = add("build-curves", "aggregate bids into step curves (timestamp,price,value)")
    _add_common(p, weight=False)
    p.add_argument("--out", type=Path, required=True)

    p = add("approximate", "fit every curve on a fixed node set")
    _add_common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--nodes", type=_float_list, help="comma-separated node prices starting at 0")
    g.add_argument("--nodes-file", type=Path)
    p.add_argument("--out", type=Path, help="output CSV (default stdout)")
    p.add_argument("--verify", action="store_true", help="check every loss against a Riemann sum")
    p.add_argument("--verify-step", type=_positive_float, default=1e-3)

    p = add("select-nodes", "grow a quantile grid until it beats the naive day-lag forecast")
    _add_common(p, split=True)
    p.add_argument("--dist", choices=METHODS, default="marginal")
    p.add_argument("--q-level", type=float, default=0.75, help="quantity quantile for --dist conditional")
    p.add_argument("--n-start", type=int, default=1)
    p.add_argument("--n-cap", type=int, default=512)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--sample", choices=("quantile", "random"), default="quantile")
    p.add_argument("--seed", type=int, default=0, help="seed for --sample random")
    p.add_argument("--scale", action="store_true", help="divide quantities by the largest training quantity")
    p.add_argument("--out", type=Path, required=True, help="node set file")
    p.add_argument("--trace", type=Path, help="selection trace CSV")

    p = add("evaluate", "mean approximation and naive errors for a node set")
    _add_common(p, split=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--nodes", type=_float_list)
    g.add_argument("--nodes-file", type=Path)
    p.add_argument("--scale", action="store_true")
    p.add_argument("--out", type=Path)

    p = add("report", "method x node-count table of mean scaled approximation errors")
    _add_common(p, split=True)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--node-counts", type=_int_list, default=list(DEFAULT_NODE_COUNTS))
    p.add_argument("--q-level", type=float, default=0.75)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--out", type=Path)

    p = add("plot-data", "emit step-curve polylines and price ECDFs as CSV")
    _add_common(p, split=True)
    p.add_argument("--timestamps", default="", help="comma-separated hours (default: first hour)")
    p.add_argument("--methods", default="marginal,conditional")
    p.add_argument("--node-counts", type=_int_list, default=list(DEFAULT_NODE_COUNTS))
    p.add_argument("--q-level", type=float, default=0.75)
    p.add_argument("--out-dir", type=Path, required=True)
    return parser


# -- shared plumbing ----------------------------------------------------------


def _load(args) -> CurvePanel:
    panel = iox.read_bids(args.bids, decimals=args.decimals)
    if getattr(args, "train_days", None) is not None:
        if args.train_days < 1:
            raise UsageError("--train-days must be >= 1")
        panel = panel.with_train_days(args.train_days)
    elif getattr(args, "train_end", None) is not None:
        panel = panel.with_split(args.train_end)
    if not panel.train_timestamps():
        raise ValueError("training window is empty")
    return panel


def _weight(args, panel: CurvePanel):
    return parse_weight(args.weight, auto_p_max=panel.max_price("train"))


def _nodes(args) -> NodeSet:
    if args.nodes is not None:
        return NodeSet(args.nodes)
    return iox.read_nodes(args.nodes_file)


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    return methods


def _emit(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        iox.write_text(path, text)


# -- commands -----------------------------------------------------------------


def cmd_synth(args):
    if len(args.bids_per_hour) != 2:
        raise UsageError("--bids-per-hour takes lo,hi")
    spec = iox.SyntheticSpec(
        seed=args.seed,
        days=args.days,
        bids_per_hour=tuple(args.bids_per_hour),
        perturbation=args.perturbation,
        start=args.start,
    )
    iox.write_bids(args.out, iox.generate_synthetic(spec))


def cmd_build_curves(args):
    iox.write_curves(args.out, iox.read_bids(args.bids, decimals=args.decimals))


def cmd_approximate(args):
    panel = _load(args)
    w = _weight(args, panel)
    nodes = _nodes(args)
    stamps = panel.timestamps()
    fits = parallel_map(lambda t: fit(panel.curves[t], nodes, w, args.r), stamps, args.threads)
    out = io.StringIO()
    cols = ",".join(f"c_{i}" for i in range(1, len(nodes) + 1))
    out.write(f"timestamp,loss,{cols}\n")
    for t, a in zip(stamps, fits):
        coeffs = ",".join(repr(c) for c in a.phi_coeffs.tolist())
        out.write(f"{iox.format_hour(t)},{a.loss!r},{coeffs}\n")
    _emit(args.out, out.getvalue())
    if args.verify:
        cfg = OracleConfig(step=args.verify_step)

        def deviation(pair):
            t, a = pair
            ref = riemann_loss(panel.curves[t], reconstruct(a), w, args.r, cfg)
            return abs(a.loss - ref) / max(abs(ref), 1e-300) if a.loss != ref else 0.0

        devs = parallel_map(deviation, list(zip(stamps, fits)), args.threads)
        print(f"verify: max relative loss deviation {max(devs):.3e} over {len(devs)} curves", file=sys.stderr)


def cmd_select_nodes(args):
    panel = _load(args)
    if args.scale:
        panel, _ = scale_panel(panel)
    w = _weight(args, panel)
    dist = build_distribution(args.dist, panel, args.q_level)
    nodes, trace = select_nodes(
        panel, w, args.r, dist,
        n_start=args.n_start, n_cap=args.n_cap, step=args.step,
        sample=args.sample, seed=args.seed, workers=args.threads,
    )
    iox.write_nodes(args.out, nodes)
    if args.trace is not None:
        iox.write_text(args.trace, iox.format_trace(trace))
    rec = trace.final
    print(
        f"status={trace.status} n={rec.n} nodes={len(nodes)} "
        f"mean_approx={rec.mean_approx_error!r} mean_naive={rec.mean_prediction_error!r}"
    )


def cmd_evaluate(args):
    panel = _load(args)
    if args.scale:
        panel, _ = scale_panel(panel)
    w = _weight(args, panel)
    nodes = _nodes(args)
    out = io.StringIO()
    out.write("window,curves,mean_approx_error,mean_prediction_error\n")
    for window in ("train", "test"):
        stamps = panel.window(window)
        if not stamps:
            continue
        p_bar = mean_prediction_error(panel, w, args.r, window=window, workers=args.threads)
        l_bar = mean_approx_error([panel.curves[t] for t in stamps], nodes, w, args.r, args.threads)
        out.write(f"{window},{len(stamps)},{l_bar!r},{p_bar!r}\n")
    _emit(args.out, out.getvalue())


def cmd_report(args):
    panel = _load(args)
    if not panel.test_timestamps():
        raise UsageError("report needs a test window; pass --train-days or --train-end")
    w = None
    if args.weight != "uniform:auto":
        w = _weight(args, panel)
    report = comparison_report(
        panel, _methods(args.methods), args.node_counts, w, args.r,
        q_level=args.q_level, scale=not args.no_scale, workers=args.threads,
    )
    _emit(args.out, iox.format_report(report))


def _polyline(curve: StepCurve, p_end: float) -> str:
    rows = ["price,value", "0.0,0.0"]
    prev = 0.0
    for p, v in curve.knots():
        if p > 0:
            rows.append(f"{p!r},{prev!r}")
        rows.append(f"{p!r},{v!r}")
        prev = v
    rows.append(f"{max(p_end, float(curve.prices[-1]) if curve.n_steps else 0.0)!r},{prev!r}")
    return "\n".join(rows) + "\n"


def _ecdf(prices: np.ndarray) -> str:
    values, counts = np.unique(prices, return_counts=True)
    cdf = np.cumsum(counts) / prices.size
    return "price,ecdf\n" + "".join(f"{p!r},{f!r}\n" for p, f in zip(values.tolist(), cdf.tolist()))


def cmd_plot_data(args):
    panel = _load(args)
    w = _weight(args, panel)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    stamps = [iox.parse_hour(s) for s in args.timestamps.split(",") if s.strip()] or panel.timestamps()[:1]
    missing = [s for s in stamps if s not in panel.curves]
    if missing:
        raise UsageError(f"no curve at {iox.format_hour(missing[0])}")
    p_end = panel.max_price("all")
    if np.isfinite(w.support_end()):
        p_end = max(p_end, w.support_end())
    dists = {m: build_distribution(m, panel, args.q_level) for m in _methods(args.methods)}
    for t in stamps:
        tag = t.strftime("%Y%m%dT%H")
        curve = panel.curves[t]
        iox.write_text(args.out_dir / f"curve_{tag}.csv", _polyline(curve, p_end))
        for method, dist in dists.items():
            for n in args.node_counts:
                approx = fit(curve, quantile_nodes(dist, n), w, args.r)
                iox.write_text(args.out_dir / f"approx_{method}_{n}_{tag}.csv", _polyline(reconstruct(approx), p_end))
    prices, quantities = panel.bid_pairs("train")
    iox.write_text(args.out_dir / "ecdf_marginal.csv", _ecdf(prices))
    cond = build_distribution("conditional", panel, args.q_level)
    iox.write_text(args.out_dir / "ecdf_conditional.csv", _ecdf(cond.support()))


COMMANDS = {
    "synth": cmd_synth,
    "build-curves": cmd_build_curves,
    "approximate": cmd_approximate,
    "select-nodes": cmd_select_nodes,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        return _fail(EXIT_USAGE, "--threads must be >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnconstrainedTailWarning)
        try:
            COMMANDS[args.command](args)
        except UsageError as err:
            return _fail(EXIT_USAGE, str(err))
        except (FileNotFoundError, PermissionError, IsADirectoryError) as err:
            return _fail(EXIT_IO, f"{err.strerror}: {err.filename}")
        except (iox.BidFormatError, iox.ArtifactFormatError) as err:
            return _fail(EXIT_FORMAT, str(err))
        except NoNaivePairsError as err:
            return _fail(EXIT_NO_NAIVE_PAIRS, f"no-naive-pairs: {err}")
        except DegenerateIntervalError as err:
            return _fail(EXIT_DEGENERATE, str(err))
        except ValueError as err:
            return _fail(EXIT_INVALID, str(err))
    return EXIT_OK


def _fail(code: int, message: str) -> int:
    print(f"supplystep: error: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
