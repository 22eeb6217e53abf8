"""Experiment orchestration: model preparation, fault sweeps and fault analysis.

Provides ExperimentService, which ties the dataset reader, the trainer, the
engine and the cost model together under one ExperimentConfig.
"""

from __future__ import annotations

import asyncio
import logging

import numpy as np

from snn_fault_sim.config import ExperimentConfig
from snn_fault_sim.cost import estimate_cost
from snn_fault_sim.dataset import DatasetFormatError, load_workload
from snn_fault_sim.encoding import encode_poisson
from snn_fault_sim.engine import majority_vote, run_batch, run_inference, run_tmr, tmr_labels
from snn_fault_sim.errors import ConfigError, SimulationError
from snn_fault_sim.faults import apply_bit_flips, generate_fault_map
from snn_fault_sim.models import (
    FAULT_KIND_NAMES,
    MAX_CODE,
    AnalysisResult,
    AnalysisRow,
    FaultMap,
    FaultTarget,
    InferenceResult,
    LabeledImages,
    MitigationKind,
    MitigationPolicy,
    NeuronFaultKind,
    QuantizedWeightMatrix,
    SweepResult,
    SweepRow,
    TmrResult,
    TrainedModel,
)
from snn_fault_sim.readout import accuracy, classify_batch
from snn_fault_sim.rng import Stream, derive_seed
from snn_fault_sim.storage import ModelFileError, load_model, save_model
from snn_fault_sim.training import stdp_train

logger = logging.getLogger(__name__)


class ExperimentServiceError(SimulationError):
    """Raised when an experiment cannot be prepared or run."""


def analysis_scenarios() -> dict[str, tuple[FaultTarget, list[NeuronFaultKind] | None]]:
    """Fault scenarios of the tolerance analysis, by name."""
    scenarios: dict[str, tuple[FaultTarget, list[NeuronFaultKind] | None]] = {
        "synapses": (FaultTarget.SYNAPSES, None),
        "neurons": (FaultTarget.NEURONS, None),
    }
    for kind in NeuronFaultKind:
        scenarios[f"neurons:{FAULT_KIND_NAMES[kind]}"] = (FaultTarget.NEURONS, [kind])
    scenarios["synapses+neurons"] = (FaultTarget.BOTH, None)
    return scenarios


def weight_histograms(
    clean: QuantizedWeightMatrix, faulty: QuantizedWeightMatrix
) -> tuple[np.ndarray, np.ndarray]:
    """256-bin code histograms of the clean and the faulty weight registers."""
    return (
        np.bincount(clean.codes.ravel(), minlength=MAX_CODE + 1),
        np.bincount(faulty.codes.ravel(), minlength=MAX_CODE + 1),
    )


class ExperimentService:
    """Runs the experiments described by one ExperimentConfig.

    All randomness is derived from ``config.master_seed``: fault map ``m`` at
    rate index ``r`` uses ``derive_seed(master, FAULT_MAP, r, m)`` and every
    policy sees the same maps, so accuracies are paired across policies.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self._config = config

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    # -- Data and model --

    def load_split(self, split: str, count: int) -> LabeledImages:
        """First ``count`` samples of a workload split.

        Raises:
            ExperimentServiceError: If the IDX files are missing or malformed.
            ConfigError: If ``count`` exceeds the split size.
        """
        config = self._config
        try:
            dataset = load_workload(config.data_dir, config.workload, split)
        except DatasetFormatError as exc:
            raise ExperimentServiceError(
                f"Failed to load the {config.workload.value} {split} split (run 'faultsim fetch' first?): {exc}"
            ) from exc
        if count > len(dataset):
            raise ConfigError(f"{split} subset of {count} exceeds the {len(dataset)} available samples")
        return dataset.subset(count)

    def load_test_set(self) -> LabeledImages:
        return self.load_split("test", self._config.test_subset)

    def train(self, dataset: LabeledImages | None = None) -> TrainedModel:
        """Train a fresh model on the training subset."""
        config = self._config
        dataset = dataset if dataset is not None else self.load_split("train", config.train_subset)
        logger.info(
            "Training N%d on %d %s samples (seed %d)",
            config.network_size, len(dataset), config.workload.value, config.master_seed,
        )
        return stdp_train(dataset, config.training_config(), config.master_seed, workload=config.workload)

    def prepare_model(self) -> TrainedModel:
        """Load the configured model file, training and saving it if allowed.

        Raises:
            ExperimentServiceError: If the model file is missing and training is
                disabled, or the file does not fit the configured network.
        """
        config = self._config
        path = config.resolved_model_path()
        if not path.exists():
            if not config.train_if_missing:
                raise ExperimentServiceError(f"Model file {path} does not exist and train_if_missing is off")
            model = self.train()
            save_model(model, path)
            return model
        try:
            model = load_model(path)
        except ModelFileError as exc:
            raise ExperimentServiceError(f"Failed to load model {path}: {exc}") from exc
        if model.network_size != config.network_size:
            raise ExperimentServiceError(
                f"Model {path} has {model.network_size} neurons but the config asks for {config.network_size}"
            )
        logger.info("Loaded model %s (%s)", path, model.weights.dims)
        return model

    def encode_sample(self, image: np.ndarray, index: int) -> np.ndarray:
        """Spike train of test sample ``index``, drawn from substream (ENCODING, index)."""
        encoding = self._config.encoding
        seed = derive_seed(self._config.master_seed, Stream.ENCODING, index)
        return encode_poisson(image, encoding.duration, encoding.max_rate, seed)

    def encode(self, dataset: LabeledImages) -> np.ndarray:
        return np.stack([self.encode_sample(image, index) for index, image in enumerate(dataset.flat_images())])

    def map_seed(self, rate_index: int, map_index: int) -> int:
        return derive_seed(self._config.master_seed, Stream.FAULT_MAP, rate_index, map_index)

    def policy(self, kind: MitigationKind, model: TrainedModel) -> MitigationPolicy:
        return MitigationPolicy.from_stats(kind, model.stats)

    # -- Single executions --

    def run_one(
        self,
        model: TrainedModel,
        dataset: LabeledImages,
        index: int,
        kind: MitigationKind,
        fault_rate: float,
        seed: int,
        fault_map: FaultMap | None = None,
    ) -> InferenceResult | TmrResult:
        """Classify test sample ``index`` once under ``kind``.

        Without an explicit ``fault_map`` one is drawn from ``seed`` at ``fault_rate``.
        """
        if not 0 <= index < len(dataset):
            raise ExperimentServiceError(f"sample index {index} outside the {len(dataset)} loaded samples")
        config = self._config
        train = self.encode_sample(dataset.flat_images()[index], index)
        if kind == MitigationKind.REEXECUTION_TMR:
            return run_tmr(model, train, fault_rate, config.engine, seed, config.cost_params)
        if fault_map is None:
            fault_map = generate_fault_map(model.weights.dims, fault_rate, seed)
        return run_inference(model, train, fault_map, self.policy(kind, model), config.engine, config.cost_params)

    # -- Sweep --

    def evaluate_cell(
        self,
        model: TrainedModel,
        trains: np.ndarray,
        labels: np.ndarray,
        kind: MitigationKind,
        rate_index: int,
        map_index: int,
    ) -> SweepRow:
        """Accuracy and cost of one (policy, rate, map) cell over the encoded test set."""
        config = self._config
        rate = config.fault_rates[rate_index]
        seed = self.map_seed(rate_index, map_index)
        if kind == MitigationKind.REEXECUTION_TMR:
            seeds = [derive_seed(seed, index) for index in range(len(trains))]
            votes = tmr_labels(model, trains, rate, config.engine, seeds)
            predictions = np.array([majority_vote([int(v) for v in row]) for row in votes])
        else:
            fault_map = generate_fault_map(model.weights.dims, rate, seed)
            counts = run_batch(model, trains, fault_map, self.policy(kind, model), config.engine)
            predictions = classify_batch(counts, model.assignment)
        cost = estimate_cost(kind, model.weights.dims, config.encoding.duration, config.cost_params, config.engine)
        row = SweepRow(
            policy=kind,
            network_size=model.network_size,
            fault_rate=rate,
            map_seed=seed,
            accuracy=accuracy(predictions, labels),
            latency=cost.latency,
            energy=cost.energy,
            area=cost.area,
        )
        logger.info(
            "Cell %s N%d rate=%g map=%d: accuracy=%.4f", kind.value, row.network_size, rate, map_index, row.accuracy
        )
        return row

    async def run_sweep(
        self,
        model: TrainedModel | None = None,
        test_set: LabeledImages | None = None,
    ) -> SweepResult:
        """Evaluate every (policy, rate, map) cell concurrently.

        Cells run in worker threads, at most ``config.workers`` at a time; rows
        come back in canonical order whatever the completion order.

        Raises:
            ExperimentServiceError: If the model or the data cannot be prepared.
            ConfigError: If a subset exceeds the dataset.
        """
        config = self._config
        if model is None:
            model = await asyncio.to_thread(self.prepare_model)
        if test_set is None:
            test_set = self.load_test_set()
        trains = await asyncio.to_thread(self.encode, test_set)
        semaphore = asyncio.Semaphore(config.workers)

        async def run_cell(kind: MitigationKind, rate_index: int, map_index: int) -> SweepRow:
            async with semaphore:
                return await asyncio.to_thread(
                    self.evaluate_cell, model, trains, test_set.labels, kind, rate_index, map_index
                )

        tasks = [
            run_cell(kind, rate_index, map_index)
            for kind in config.policies
            for rate_index in range(len(config.fault_rates))
            for map_index in range(config.num_fault_maps)
        ]
        logger.info("Running %d sweep cells on %d workers", len(tasks), config.workers)
        rows = await asyncio.gather(*tasks)
        return SweepResult(rows=list(rows))

    # -- Fault-tolerance analysis --

    def analyze_cell(
        self,
        model: TrainedModel,
        trains: np.ndarray,
        labels: np.ndarray,
        scenario: str,
        rate_index: int,
        map_index: int,
    ) -> AnalysisRow:
        """Unmitigated accuracy under one restricted fault scenario."""
        config = self._config
        target, kinds = analysis_scenarios()[scenario]
        rate = config.fault_rates[rate_index]
        seed = self.map_seed(rate_index, map_index)
        fault_map = generate_fault_map(model.weights.dims, rate, seed, target=target, neuron_kinds=kinds)
        counts = run_batch(model, trains, fault_map, MitigationPolicy(), config.engine)

        clean = model.weights.codes.astype(np.int64)
        faulty = apply_bit_flips(model.weights, fault_map).codes.astype(np.int64)
        changed = faulty != clean
        return AnalysisRow(
            scenario=scenario,
            fault_rate=rate,
            map_seed=seed,
            accuracy=accuracy(classify_batch(counts, model.assignment), labels),
            weights_increased=int(np.count_nonzero(faulty > clean)),
            weights_decreased=int(np.count_nonzero(faulty < clean)),
            weights_at_or_above_max=int(np.count_nonzero(changed & (faulty >= model.stats.wgh_max))),
        )

    async def run_analysis(
        self,
        model: TrainedModel | None = None,
        test_set: LabeledImages | None = None,
    ) -> AnalysisResult:
        """Characterise how each kind of fault hurts the unmitigated network."""
        config = self._config
        if model is None:
            model = await asyncio.to_thread(self.prepare_model)
        if test_set is None:
            test_set = self.load_test_set()
        trains = await asyncio.to_thread(self.encode, test_set)
        semaphore = asyncio.Semaphore(config.workers)

        async def run_cell(scenario: str, rate_index: int, map_index: int) -> AnalysisRow:
            async with semaphore:
                return await asyncio.to_thread(
                    self.analyze_cell, model, trains, test_set.labels, scenario, rate_index, map_index
                )

        clean_counts = await asyncio.to_thread(run_batch, model, trains, None, MitigationPolicy(), config.engine)
        rows = await asyncio.gather(
            *[
                run_cell(scenario, rate_index, map_index)
                for scenario in analysis_scenarios()
                for rate_index in range(len(config.fault_rates))
                for map_index in range(config.num_fault_maps)
            ]
        )
        return AnalysisResult(
            rows=list(rows),
            clean_accuracy=accuracy(classify_batch(clean_counts, model.assignment), test_set.labels),
        )

    def histogram_map(self, model: TrainedModel) -> FaultMap:
        """First fault map at the highest configured rate, as used for weight histograms."""
        rates = self._config.fault_rates
        rate_index = max(range(len(rates)), key=rates.__getitem__)
        return generate_fault_map(
            model.weights.dims, rates[rate_index], self.map_seed(rate_index, 0), target=FaultTarget.SYNAPSES
        )
