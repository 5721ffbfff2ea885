"""Rewrite the golden fixtures. Run only when an output change is intended:

    python tests/golden/regenerate.py
"""

import json
import warnings
from pathlib import Path

from supplystep import ingest_io as iox
from supplystep.cli import main
from supplystep.evaluation import mean_approx_error, mean_prediction_error, scale_panel
from supplystep.node_selection import build_distribution, quantile_nodes, select_nodes
from supplystep.weighting import TruncatedUniformWeight

HERE = Path(__file__).parent


def golden_panel():
    return iox.generate_synthetic(iox.SyntheticSpec(seed=7, days=40)).with_train_days(30)


def golden_means():
    panel = golden_panel()
    w = TruncatedUniformWeight(panel.max_price("train"))
    nodes = quantile_nodes(build_distribution("marginal", panel), 10)
    train = [panel.curves[t] for t in panel.train_timestamps()]
    return {
        "mean_prediction_error_train": mean_prediction_error(panel, w, 2.0),
        "mean_approx_error_train_marginal10": mean_approx_error(train, nodes, w, 2.0),
    }


def golden_trace():
    panel, _ = scale_panel(golden_panel())
    w = TruncatedUniformWeight(panel.max_price("train"))
    _, trace = select_nodes(panel, w, 2.0, build_distribution("marginal", panel))
    return iox.format_trace(trace)


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    small = iox.generate_synthetic(iox.SyntheticSpec(seed=7, days=2))
    (HERE / "synth_seed7_days2.sha256").write_text(iox.panel_checksum(small) + "\n")
    bids = HERE / "_bids.csv"
    main(["synth", "--seed", "7", "--days", "40", "--out", str(bids)])
    main(["report", "--bids", str(bids), "--train-days", "30", "--out", str(HERE / "report_seed7.csv")])
    bids.unlink()
    (HERE / "trace_seed7_marginal.csv").write_text(golden_trace())
    (HERE / "means_seed7.json").write_text(json.dumps(golden_means(), indent=2) + "\n")
