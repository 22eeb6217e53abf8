"""Sweep and analysis reports: CSV tables and SVG charts."""

from __future__ import annotations

import csv
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from jinja2 import Environment, PackageLoader, StrictUndefined
from pydantic import ValidationError

from snn_fault_sim.errors import SimulationError
from snn_fault_sim.models import (
    POLICY_NAMES,
    AnalysisResult,
    CellSummary,
    MitigationKind,
    SweepResult,
    SweepRow,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["policy", "network", "rate", "map_seed", "accuracy", "latency_s", "energy_j", "area_norm"]
ANALYSIS_COLUMNS = [
    "scenario",
    "rate",
    "map_seed",
    "accuracy",
    "weights_increased",
    "weights_decreased",
    "weights_at_or_above_max",
]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

_env = Environment(
    loader=PackageLoader("snn_fault_sim", "templates"),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


class ReportError(SimulationError):
    """Raised when a report cannot be written or read back."""


class ReportFormat(str, Enum):
    CSV = "csv"
    SVG = "svg"


# -- CSV --

def _sweep_record(row: SweepRow) -> dict[str, str]:
    return {
        "policy": row.policy.value,
        "network": f"N{row.network_size}",
        "rate": repr(row.fault_rate),
        "map_seed": str(row.map_seed),
        "accuracy": repr(row.accuracy),
        "latency_s": repr(row.latency),
        "energy_j": repr(row.energy),
        "area_norm": repr(row.area),
    }


def write_sweep_csv(result: SweepResult, path: Path) -> Path:
    """Write one line per sweep row in canonical order; floats use their shortest exact repr."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(_sweep_record(row) for row in result.rows)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def read_sweep_csv(path: Path) -> SweepResult:
    """Parse a sweep CSV back into a SweepResult.

    Raises:
        ReportError: If the file is unreadable, has other columns, or holds invalid rows.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != SWEEP_COLUMNS:
                raise ReportError(f"{path}: expected columns {SWEEP_COLUMNS}, found {reader.fieldnames}")
            records = list(reader)
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc

    rows = []
    for line, record in enumerate(records, start=2):
        try:
            rows.append(
                SweepRow(
                    policy=MitigationKind(record["policy"]),
                    network_size=int(record["network"].removeprefix("N")),
                    fault_rate=float(record["rate"]),
                    map_seed=int(record["map_seed"]),
                    accuracy=float(record["accuracy"]),
                    latency=float(record["latency_s"]),
                    energy=float(record["energy_j"]),
                    area=float(record["area_norm"]),
                )
            )
        except (ValueError, ValidationError) as exc:
            raise ReportError(f"{path}:{line}: invalid sweep row: {exc}") from exc
    try:
        return SweepResult(rows=rows)
    except ValidationError as exc:
        raise ReportError(f"{path}: {exc.errors()[0]['msg']}") from exc


def write_analysis_csv(result: AnalysisResult, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(ANALYSIS_COLUMNS)
            writer.writerow(["clean", repr(0.0), "", repr(result.clean_accuracy), 0, 0, 0])
            for row in result.rows:
                writer.writerow(
                    [
                        row.scenario,
                        repr(row.fault_rate),
                        row.map_seed,
                        repr(row.accuracy),
                        row.weights_increased,
                        row.weights_decreased,
                        row.weights_at_or_above_max,
                    ]
                )
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def write_weight_histograms(clean: np.ndarray, faulty: np.ndarray, path: Path) -> Path:
    """Per-code counts of the clean and the faulty weights, one line per code."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["code", "clean", "faulty"])
            for code, (before, after) in enumerate(zip(clean, faulty)):
                writer.writerow([code, int(before), int(after)])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


# -- SVG --

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 480, 40, 350


def _series_name(policy: MitigationKind, network_size: int, networks: int) -> str:
    name = POLICY_NAMES[policy]
    return f"{name} N{network_size}" if networks > 1 else name


def accuracy_chart(cells: list[CellSummary]) -> str:
    """Mean accuracy against fault rate, one polyline per policy (and network)."""
    rates = sorted({cell.fault_rate for cell in cells})
    networks = sorted({cell.network_size for cell in cells})
    step = (RIGHT - LEFT) / max(len(rates) - 1, 1)
    x_of = {rate: LEFT + index * step if len(rates) > 1 else (LEFT + RIGHT) / 2 for index, rate in enumerate(rates)}

    def y_of(value: float) -> float:
        return round(BOTTOM - value * (BOTTOM - TOP), 2)

    series: dict[tuple[MitigationKind, int], list[CellSummary]] = {}
    for cell in cells:
        series.setdefault((cell.policy, cell.network_size), []).append(cell)
    series_list = [
        {
            "name": _series_name(policy, network, len(networks)),
            "color": PALETTE[index % len(PALETTE)],
            "points": [
                f"{round(x_of[c.fault_rate], 2)},{y_of(c.mean_accuracy)}"
                for c in sorted(members, key=lambda c: c.fault_rate)
            ],
        }
        for index, ((policy, network), members) in enumerate(series.items())
    ]
    return _env.get_template("line_chart.svg.j2").render(
        title="Accuracy vs. fault rate",
        x_label="fault rate",
        y_label="accuracy",
        width=WIDTH,
        height=HEIGHT,
        left=LEFT,
        right=RIGHT,
        top=TOP,
        bottom=BOTTOM,
        x_ticks=[{"x": round(x_of[rate], 2), "label": f"{rate:g}"} for rate in rates],
        y_ticks=[{"y": y_of(v / 5), "label": f"{v / 5:.1f}"} for v in range(6)],
        series_list=series_list,
    )


def cost_chart(cells: list[CellSummary], metric: str, title: str, unit: str) -> str:
    """Bar per policy (and network) of a cost metric averaged over the policy's cells."""
    networks = sorted({cell.network_size for cell in cells})
    groups: dict[tuple[MitigationKind, int], list[float]] = {}
    for cell in cells:
        groups.setdefault((cell.policy, cell.network_size), []).append(getattr(cell, metric))
    values = {key: float(np.mean(group)) for key, group in groups.items()}
    peak = max(values.values()) or 1.0
    slot = (RIGHT - LEFT) / len(values)
    bars = []
    for index, ((policy, network), value) in enumerate(values.items()):
        height = round(value / peak * (BOTTOM - TOP), 2)
        bars.append(
            {
                "name": _series_name(policy, network, len(networks)),
                "color": PALETTE[index % len(PALETTE)],
                "x": round(LEFT + index * slot + slot * 0.15, 2),
                "y": round(BOTTOM - height, 2),
                "width": round(slot * 0.7, 2),
                "height": height,
                "value": f"{value:.3g}",
            }
        )
    return _env.get_template("bar_chart.svg.j2").render(
        title=title,
        y_label=unit,
        width=WIDTH,
        height=HEIGHT,
        left=LEFT,
        right=RIGHT,
        top=TOP,
        bottom=BOTTOM,
        bars=bars,
    )


COST_CHARTS = {
    "latency": ("Latency per inference", "seconds"),
    "energy": ("Energy per inference", "joules"),
    "area": ("Normalised engine area", "area (x unmitigated)"),
}


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def emit_report(
    result: SweepResult,
    out_dir: Path,
    formats: Iterable[ReportFormat] = (ReportFormat.CSV, ReportFormat.SVG),
    provenance: dict[str, Any] | None = None,
) -> list[Path]:
    """Write the requested report files into ``out_dir``.

    CSV produces ``sweep.csv``; SVG produces ``accuracy.svg`` plus one bar
    chart per cost metric. ``provenance`` (cost parameters and the config
    echo) goes to ``provenance.json`` when given.

    Raises:
        ReportError: If the result is empty or a file cannot be written.
    """
    if not result.rows:
        raise ReportError("nothing to report: the sweep result has no rows")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create {out_dir}: {exc}") from exc

    formats = set(formats)
    written: list[Path] = []
    if ReportFormat.CSV in formats:
        written.append(write_sweep_csv(result, out_dir / "sweep.csv"))
    if ReportFormat.SVG in formats:
        cells = result.aggregate()
        written.append(_write_text(out_dir / "accuracy.svg", accuracy_chart(cells)))
        for metric, (title, unit) in COST_CHARTS.items():
            written.append(_write_text(out_dir / f"{metric}.svg", cost_chart(cells, metric, title, unit)))
    if provenance is not None:
        written.append(
            _write_text(out_dir / "provenance.json", json.dumps(provenance, indent=2, sort_keys=True) + "\n")
        )
    logger.info("Wrote %d report files to %s", len(written), out_dir)
    return written
