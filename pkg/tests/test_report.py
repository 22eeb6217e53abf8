"""Tests for CSV and SVG reports."""

from __future__ import annotations

import json
import re
from pathlib import Path

import pytest

from snn_fault_sim.models import AnalysisResult, AnalysisRow, MitigationKind, SweepResult, SweepRow
from snn_fault_sim.report import (
    SWEEP_COLUMNS,
    ReportError,
    ReportFormat,
    accuracy_chart,
    emit_report,
    read_sweep_csv,
    write_analysis_csv,
    write_sweep_csv,
    write_weight_histograms,
)

RATES = [0.0, 0.01, 0.05, 0.1]
POLICIES = [MitigationKind.NO_MITIGATION, MitigationKind.BNP3, MitigationKind.REEXECUTION_TMR]


def _row(policy: MitigationKind, rate: float, seed: int, accuracy: float = 0.9) -> SweepRow:
    return SweepRow(
        policy=policy,
        network_size=100,
        fault_rate=rate,
        map_seed=seed,
        accuracy=accuracy,
        latency=2.56e-4 / 3,
        energy=5.12e-6,
        area=1.18,
    )


@pytest.fixture
def result() -> SweepResult:
    """Three policies at four rates with two maps each."""
    return SweepResult(
        rows=[
            _row(policy, rate, seed, accuracy=1.0 - rate * (index + 1))
            for index, policy in enumerate(POLICIES)
            for rate in RATES
            for seed in (11, 12)
        ]
    )


class TestSweepCsv:
    """Tests for write_sweep_csv / read_sweep_csv."""

    def test_round_trip(self, result: SweepResult, tmp_path: Path) -> None:
        """Verify every float survives exactly."""
        path = write_sweep_csv(result, tmp_path / "sweep.csv")
        assert read_sweep_csv(path) == result

    def test_single_cell(self, tmp_path: Path) -> None:
        """Verify one cell gives a header and a single line."""
        path = write_sweep_csv(SweepResult(rows=[_row(MitigationKind.BNP1, 0.1, 7)]), tmp_path / "sweep.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 2
        assert lines[1].startswith("bnp1,N100,0.1,7,0.9,")

    def test_wrong_columns(self, tmp_path: Path) -> None:
        """Verify a CSV with other columns is refused."""
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ReportError, match="expected columns"):
            read_sweep_csv(path)

    def test_invalid_row(self, result: SweepResult, tmp_path: Path) -> None:
        """Verify a bad value names its line."""
        path = write_sweep_csv(result, tmp_path / "sweep.csv")
        lines = path.read_text().splitlines()
        lines[3] = lines[3].replace("none", "bnp9")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ReportError, match=":4:"):
            read_sweep_csv(path)


class TestOtherTables:
    """Tests for the analysis and histogram tables."""

    def test_analysis_csv(self, tmp_path: Path) -> None:
        """Verify the clean row leads the analysis table."""
        analysis = AnalysisResult(
            rows=[
                AnalysisRow(
                    scenario="synapses",
                    fault_rate=0.1,
                    map_seed=3,
                    accuracy=0.5,
                    weights_increased=4,
                    weights_decreased=2,
                    weights_at_or_above_max=1,
                )
            ],
            clean_accuracy=0.75,
        )
        lines = write_analysis_csv(analysis, tmp_path / "analysis.csv").read_text().splitlines()
        assert lines[1] == "clean,0.0,,0.75,0,0,0"
        assert lines[2] == "synapses,0.1,3,0.5,4,2,1"

    def test_weight_histograms(self, tmp_path: Path) -> None:
        """Verify one line per code."""
        lines = write_weight_histograms([5] + [0] * 255, [4, 1] + [0] * 254, tmp_path / "w.csv").read_text()
        rows = lines.splitlines()
        assert len(rows) == 257
        assert rows[1:3] == ["0,5,4", "1,0,1"]


class TestCharts:
    """Tests for the SVG charts and emit_report."""

    def test_one_polyline_per_policy(self, result: SweepResult) -> None:
        """Verify each policy is a polyline with one point per rate."""
        svg = accuracy_chart(result.aggregate())
        polylines = re.findall(r'<polyline class="series"[^>]*points="([^"]*)"', svg)
        assert len(polylines) == 3
        assert all(len(points.split()) == 4 for points in polylines)
        assert 'data-series="BnP3"' in svg

    def test_emit_report_files(self, result: SweepResult, tmp_path: Path) -> None:
        """Verify the CSV, the four charts and the provenance file are written."""
        written = emit_report(result, tmp_path / "out", provenance={"master_seed": 2022})
        names = sorted(path.name for path in written)
        assert names == [
            "accuracy.svg",
            "area.svg",
            "energy.svg",
            "latency.svg",
            "provenance.json",
            "sweep.csv",
        ]
        assert json.loads((tmp_path / "out" / "provenance.json").read_text()) == {"master_seed": 2022}
        assert (tmp_path / "out" / "latency.svg").read_text().count('<rect class="bar"') == 3

    def test_csv_only(self, result: SweepResult, tmp_path: Path) -> None:
        """Verify only the requested formats are produced."""
        written = emit_report(result, tmp_path, formats=[ReportFormat.CSV])
        assert [path.name for path in written] == ["sweep.csv"]

    def test_empty_result(self, tmp_path: Path) -> None:
        """Verify an empty sweep is refused."""
        with pytest.raises(ReportError, match="no rows"):
            emit_report(SweepResult(rows=[]), tmp_path)

    def test_unwritable_directory(self, result: SweepResult, tmp_path: Path) -> None:
        """Verify a file in place of the output directory raises ReportError."""
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(ReportError, match="cannot create"):
            emit_report(result, blocker / "out")
