import io
from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from supplystep import ingest_io as iox
from supplystep.evaluation import naive_pairs
from supplystep.node_selection import SelectionTrace, TraceRecord
from supplystep.projection import Approximation, NodeSet, project_l2
from supplystep.report import ErrorReport, ReportRow
from supplystep.rng import SplitMix64
from supplystep.weighting import TruncatedUniformWeight

GOLDEN = Path(__file__).parent / "golden"


def test_splitmix64_reference_values():
    # published SplitMix64 outputs for seed 1234567
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_splitmix_ranges():
    rng = SplitMix64(0)
    draws = [rng.uniform() for _ in range(1000)]
    assert 0 <= min(draws) and max(draws) < 1
    assert {rng.integer(2, 4) for _ in range(200)} == {2, 3, 4}


def test_read_bids_one_hour():
    panel = iox.parse_bids(io.StringIO("timestamp,price,quantity\n2016-01-01T05:00,10.5,3\n2016-01-01T05:00,7,1\n"))
    assert len(panel) == 1
    assert panel.curves[datetime(2016, 1, 1, 5)].knots() == [(7.0, 1.0), (10.5, 4.0)]


def test_read_bids_merges_duplicate_prices():
    panel = iox.parse_bids(io.StringIO("timestamp,price,quantity\n2016-01-01T05:00,10,3\n2016-01-01T05:00,10.00,1\n"))
    assert panel.curves[datetime(2016, 1, 1, 5)].knots() == [(10.0, 4.0)]


@pytest.mark.parametrize(
    "body, line",
    [
        ("2016-01-01T00:00,1,1\n2016-01-01T00:00,2,-1\n", 3),
        ("2016-01-01T00:00,1,1\n2016-01-01T00:00,x,1\n", 3),
        ("2016-01-01T00:30,1,1\n", 2),
        ("2016-01-01T00:00,1\n", 2),
        ("2016-01-01T00:00,-1,1\n", 2),
    ],
)
def test_read_bids_errors_name_the_line(body, line):
    with pytest.raises(iox.BidFormatError) as info:
        iox.parse_bids(io.StringIO("timestamp,price,quantity\n" + body))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_read_bids_header_and_empty():
    with pytest.raises(iox.BidFormatError):
        iox.parse_bids(io.StringIO(""))
    with pytest.raises(iox.BidFormatError):
        iox.parse_bids(io.StringIO("time,price,qty\n"))
    with pytest.raises(iox.BidFormatError):
        iox.parse_bids(io.StringIO("timestamp,price,quantity\n"))


def test_48_hours_give_24_naive_pairs(tmp_path):
    rows = ["timestamp,price,quantity"]
    for h in range(48):
        rows.append(f"2016-01-{1 + h // 24:02d}T{h % 24:02d}:00,{h % 7}.25,{1 + h}")
    path = tmp_path / "b.csv"
    path.write_text("\n".join(rows) + "\n")
    panel = iox.read_bids(path)
    assert len(panel) == 48
    assert len(naive_pairs(panel)) == 24


def test_bids_round_trip(tmp_path):
    panel = iox.generate_synthetic(iox.SyntheticSpec(seed=11, days=2, bids_per_hour=(3, 8)))
    path = tmp_path / "bids.csv"
    iox.write_bids(path, panel)
    again = iox.read_bids(path)
    assert again.curves == panel.curves
    assert iox.format_bids(again) == iox.format_bids(panel)


def test_curves_round_trip(tmp_path):
    panel = iox.generate_synthetic(iox.SyntheticSpec(seed=11, days=1, bids_per_hour=(3, 8)))
    iox.write_curves(tmp_path / "c.csv", panel)
    assert iox.read_curves(tmp_path / "c.csv").curves == panel.curves


def test_nodeset_round_trip(tmp_path):
    nodes = NodeSet([0, 13, 38])
    iox.write_nodes(tmp_path / "n.csv", nodes)
    assert iox.read_nodes(tmp_path / "n.csv") == nodes
    ugly = NodeSet(np.linspace(0, 300, 19))
    iox.write_nodes(tmp_path / "u.csv", ugly)
    assert iox.read_nodes(tmp_path / "u.csv") == ugly


def test_nodeset_version_checked(tmp_path):
    (tmp_path / "n.csv").write_text("# supplystep nodeset v9\nprice\n0\n")
    with pytest.raises(iox.ArtifactFormatError):
        iox.read_nodes(tmp_path / "n.csv")
    (tmp_path / "m.csv").write_text("# supplystep nodeset v1\nprize\n0\n")
    with pytest.raises(iox.ArtifactFormatError):
        iox.read_nodes(tmp_path / "m.csv")


def test_approximation_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    from supplystep.curve_model import StepCurve

    curve = StepCurve(np.sort(rng.choice(10000, 40, replace=False)) / 100, np.cumsum(rng.uniform(0.1, 9, 40)))
    nodes = NodeSet(np.concatenate(([0], np.sort(rng.choice(np.arange(1, 10000), 19, replace=False)) / 100)))
    approx = project_l2(curve, nodes, TruncatedUniformWeight(120))
    iox.write_approximation(tmp_path / "a.csv", approx)
    back = iox.read_approximation(tmp_path / "a.csv")
    assert back.nodes == approx.nodes and back.loss == approx.loss and back.r == approx.r
    np.testing.assert_array_equal(back.phi_coeffs, approx.phi_coeffs)
    np.testing.assert_array_equal(back.theta_coeffs, approx.theta_coeffs)
    (tmp_path / "b.csv").write_text("# supplystep approximation v1\nnode,phi,theta\n0,1,1\n")
    with pytest.raises(iox.ArtifactFormatError):
        iox.read_approximation(tmp_path / "b.csv")


def test_trace_round_trip():
    trace = SelectionTrace([TraceRecord(1, 2, 0.5, 0.25), TraceRecord(2, 3, 0.125, 0.25)], "converged")
    assert iox.parse_trace(iox.format_trace(trace)) == trace


def test_report_round_trip_and_format():
    rep = ErrorReport([ReportRow("marginal", 5, 0.0051193), ReportRow("uniform", 20, 0.0654651)], 0.0059593, 24.5)
    text = iox.format_report(rep)
    assert text == (
        "# naive_mscape=5.9593\n# scale=24.5\nmethod,n,mscape\nmarginal,5,5.1193\nuniform,20,65.4651\n"
    )
    back = iox.parse_report(text)
    assert iox.format_report(back) == text
    assert back.rows[0].mscape == pytest.approx(0.0051193, rel=1e-15)


def test_synthetic_deterministic_and_golden():
    spec = iox.SyntheticSpec(seed=7, days=2)
    a, b = iox.generate_synthetic(spec), iox.generate_synthetic(spec)
    assert len(a) == 48
    assert iox.panel_checksum(a) == iox.panel_checksum(b)
    assert iox.panel_checksum(a) == (GOLDEN / "synth_seed7_days2.sha256").read_text().strip()


def test_synthetic_zero_perturbation_repeats_days():
    panel = iox.generate_synthetic(iox.SyntheticSpec(seed=1, days=3, perturbation=0.0))
    stamps = panel.timestamps()
    for i in range(24, len(stamps)):
        assert panel.curves[stamps[i]] == panel.curves[stamps[i - 24]]


def test_synthetic_positive_perturbation_changes_days():
    panel = iox.generate_synthetic(iox.SyntheticSpec(seed=1, days=2))
    stamps = panel.timestamps()
    assert all(panel.curves[stamps[i]] != panel.curves[stamps[i + 24]] for i in range(24))


def test_synthetic_single_bid_hours():
    panel = iox.generate_synthetic(iox.SyntheticSpec(seed=2, days=2, bids_per_hour=(1, 1)))
    assert all(c.n_steps == 1 for c in panel.curves.values())


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        iox.SyntheticSpec(components=(iox.PriceComponent(0.5, (0, 10), (1, 2)),))
    with pytest.raises(ValueError):
        iox.SyntheticSpec(bids_per_hour=(0, 3))
    with pytest.raises(ValueError):
        iox.SyntheticSpec(perturbation=-0.1)
