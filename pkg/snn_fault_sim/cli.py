"""Click CLI for the SNN soft-error simulator."""

from __future__ import annotations

import asyncio
import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import click

from snn_fault_sim.client import MirrorClient
from snn_fault_sim.config import ExperimentConfig, get_settings, load_experiment_config
from snn_fault_sim.errors import ConfigError, SimulationError
from snn_fault_sim.faults import apply_bit_flips, deserialize_fault_map, generate_fault_map, serialize_fault_map
from snn_fault_sim.models import CrossbarDims, FaultTarget, MitigationKind, Workload
from snn_fault_sim.report import (
    ReportFormat,
    emit_report,
    read_sweep_csv,
    write_analysis_csv,
    write_weight_histograms,
)
from snn_fault_sim.rng import GENERATOR_NAME
from snn_fault_sim.service import ExperimentService, weight_histograms
from snn_fault_sim.storage import save_model

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def _run_async(coro):  # type: ignore[no-untyped-def]
    """Run an async coroutine in a new event loop."""
    if sys.version_info >= (3, 11):
        return asyncio.run(coro)
    else:
        loop = asyncio.new_event_loop()
        try:
            return loop.run_until_complete(coro)
        finally:
            loop.close()


def _handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Map simulator errors onto exit codes: 1 for configuration, 2 for everything else."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"Error: {exc}", err=True)
            raise SystemExit(EXIT_CONFIG_ERROR) from exc
        except SimulationError as exc:
            click.echo(f"Error: {exc}", err=True)
            raise SystemExit(EXIT_RUNTIME_ERROR) from exc

    return wrapper


def _experiment_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """--config, --seed and --set, shared by every experiment command."""
    func = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config value, e.g. --set lif.v_threshold=25 (repeatable).",
    )(func)
    func = click.option("--seed", type=int, default=None, help="Master seed (overrides master_seed).")(func)
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(path_type=Path, dir_okay=False),
        default=None,
        help="Experiment JSON file (default: built-in defaults).",
    )(func)
    return func


def _load_config(config_path: Path | None, seed: int | None, overrides: tuple[str, ...]) -> ExperimentConfig:
    extra = [f"master_seed={seed}"] if seed is not None else []
    return load_experiment_config(config_path, [*overrides, *extra])


def _echo_json(payload: Any, out: Path | None = None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out is None:
        click.echo(text)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise SimulationError(f"cannot write {out}: {exc}") from exc
    click.echo(f"Wrote {out}")


def _provenance(config: ExperimentConfig) -> dict[str, Any]:
    return {
        "cost_params": config.cost_params.model_dump(mode="json"),
        "generator": GENERATOR_NAME,
        "config": config.model_dump(mode="json"),
    }


@click.group()
def cli() -> None:
    """faultsim - soft errors and their mitigation in an SNN compute engine."""
    settings = get_settings()
    logging.basicConfig(level=settings.log_level.upper(), format="%(levelname)s: %(message)s")


@cli.command("train")
@_experiment_options
@click.option("--out", type=click.Path(path_type=Path, dir_okay=False), default=None, help="Model file to write.")
@_handle_errors
def train(config_path: Path | None, seed: int | None, overrides: tuple[str, ...], out: Path | None) -> None:
    """Train a clean SNN with STDP and save it."""
    config = _load_config(config_path, seed, overrides)
    service = ExperimentService(config)
    model = service.train()
    path = out or config.resolved_model_path()
    save_model(model, path)
    _echo_json(
        {
            "model": str(path),
            "dims": str(model.weights.dims),
            "wgh_max": model.stats.wgh_max,
            "wgh_hp": model.stats.wgh_hp,
            "assigned_neurons": sum(1 for label in model.assignment.labels if label >= 0),
        }
    )


@cli.command("inject")
@_experiment_options
@click.option("--rate", type=float, required=True, help="Fault rate in [0, 1].")
@click.option("--dims", default=None, help="Crossbar dimensions ROWSxCOLS (default: 784xNETWORK_SIZE).")
@click.option(
    "--target",
    type=click.Choice([t.value for t in FaultTarget]),
    default=FaultTarget.BOTH.value,
    show_default=True,
    help="Locations that may fault.",
)
@click.option("--out", type=click.Path(path_type=Path, dir_okay=False), default=None, help="Fault-map file to write.")
@_handle_errors
def inject(
    config_path: Path | None,
    seed: int | None,
    overrides: tuple[str, ...],
    rate: float,
    dims: str | None,
    target: str,
    out: Path | None,
) -> None:
    """Generate a fault map."""
    config = _load_config(config_path, seed, overrides)
    try:
        crossbar = CrossbarDims.parse(dims) if dims else CrossbarDims(rows=784, cols=config.network_size)
    except ValueError as exc:
        raise ConfigError(f"invalid --dims: {exc}") from exc
    fault_map = generate_fault_map(crossbar, rate, config.master_seed, target=FaultTarget(target))
    document = serialize_fault_map(fault_map)
    if out is None:
        click.echo(document.decode("utf-8"), nl=False)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(document)
    except OSError as exc:
        raise SimulationError(f"cannot write {out}: {exc}") from exc
    click.echo(
        f"Wrote {out}: {len(fault_map.synapse_flips)} bit flips, {len(fault_map.neuron_faults)} faulty neurons"
    )


@cli.command("run")
@_experiment_options
@click.option(
    "--policy",
    type=click.Choice([k.value for k in MitigationKind]),
    default=MitigationKind.NO_MITIGATION.value,
    show_default=True,
)
@click.option("--rate", type=float, default=0.0, show_default=True, help="Fault rate when no --fault-map is given.")
@click.option("--index", type=int, default=0, show_default=True, help="Test sample to classify.")
@click.option("--fault-map", "fault_map_path", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--out", type=click.Path(path_type=Path, dir_okay=False), default=None, help="JSON result file.")
@_handle_errors
def run(
    config_path: Path | None,
    seed: int | None,
    overrides: tuple[str, ...],
    policy: str,
    rate: float,
    index: int,
    fault_map_path: Path | None,
    out: Path | None,
) -> None:
    """Classify one test sample on a faulty engine."""
    config = _load_config(config_path, seed, overrides)
    service = ExperimentService(config)
    model = service.prepare_model()
    test_set = service.load_split("test", index + 1)
    fault_map = deserialize_fault_map(fault_map_path.read_bytes()) if fault_map_path else None
    result = service.run_one(model, test_set, index, MitigationKind(policy), rate, config.master_seed, fault_map)
    payload = result.model_dump(mode="json", exclude={"spike_counts"})
    payload["true_label"] = int(test_set.labels[index])
    _echo_json(payload, out)


@cli.command("sweep")
@_experiment_options
@click.option("--out", type=click.Path(path_type=Path, file_okay=False), default=Path("results"), show_default=True)
@click.option(
    "--format",
    "formats",
    type=click.Choice([f.value for f in ReportFormat]),
    multiple=True,
    help="Report formats (default: all).",
)
@_handle_errors
def sweep(
    config_path: Path | None,
    seed: int | None,
    overrides: tuple[str, ...],
    out: Path,
    formats: tuple[str, ...],
) -> None:
    """Run the fault-rate x fault-map x policy sweep and write its report."""
    config = _load_config(config_path, seed, overrides)
    result = _run_async(ExperimentService(config).run_sweep())
    logger.info("Cost parameters: %s", config.cost_params.model_dump())
    chosen = [ReportFormat(f) for f in formats] or list(ReportFormat)
    for path in emit_report(result, out, chosen, _provenance(config)):
        click.echo(f"Wrote {path}")


@cli.command("report")
@_experiment_options
@click.option(
    "--input",
    "input_path",
    type=click.Path(path_type=Path, exists=True, dir_okay=False),
    required=True,
    help="sweep.csv produced by 'faultsim sweep'.",
)
@click.option("--out", type=click.Path(path_type=Path, file_okay=False), default=Path("results"), show_default=True)
@_handle_errors
def report(
    config_path: Path | None,
    seed: int | None,
    overrides: tuple[str, ...],
    input_path: Path,
    out: Path,
) -> None:
    """Re-render the charts of an existing sweep CSV."""
    config = _load_config(config_path, seed, overrides)
    result = read_sweep_csv(input_path)
    logger.info("Cost parameters: %s", config.cost_params.model_dump())
    for path in emit_report(result, out, [ReportFormat.SVG], _provenance(config)):
        click.echo(f"Wrote {path}")


@cli.command("analyze")
@_experiment_options
@click.option("--out", type=click.Path(path_type=Path, file_okay=False), default=Path("results"), show_default=True)
@_handle_errors
def analyze(config_path: Path | None, seed: int | None, overrides: tuple[str, ...], out: Path) -> None:
    """Measure how synapse and neuron faults degrade the unmitigated network."""
    config = _load_config(config_path, seed, overrides)
    service = ExperimentService(config)
    model = service.prepare_model()
    result = _run_async(service.run_analysis(model))
    click.echo(f"Clean accuracy: {result.clean_accuracy:.4f}")
    click.echo(f"Wrote {write_analysis_csv(result, out / 'analysis.csv')}")
    faulty = apply_bit_flips(model.weights, service.histogram_map(model))
    clean_hist, faulty_hist = weight_histograms(model.weights, faulty)
    click.echo(f"Wrote {write_weight_histograms(clean_hist, faulty_hist, out / 'weights.csv')}")


@cli.command("fetch")
@click.option(
    "--workload",
    type=click.Choice([w.value for w in Workload]),
    default=Workload.MNIST.value,
    show_default=True,
)
@click.option(
    "--data-dir", type=click.Path(path_type=Path, file_okay=False), default=None, help="Overrides SNNFAULT_DATA_DIR."
)
@click.option("--force", is_flag=True, help="Download even when the files exist.")
@_handle_errors
def fetch(workload: str, data_dir: Path | None, force: bool) -> None:
    """Download the IDX files of a workload from its public mirror."""
    _run_async(_fetch_async(Workload(workload), data_dir, force))


async def _fetch_async(workload: Workload, data_dir: Path | None, force: bool) -> None:
    """Async implementation of the fetch command."""
    settings = get_settings()
    async with MirrorClient(settings) as client:
        written = await client.fetch_workload(workload, data_dir, force=force)
    click.echo(f"Fetched {len(written)} files for {workload.value}")


if __name__ == "__main__":
    cli()
