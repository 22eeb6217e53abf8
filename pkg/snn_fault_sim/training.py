"""Unsupervised STDP training of the clean SNN.

A single layer of LIF neurons, fully connected to the Poisson-coded pixels,
with direct lateral inhibition and adaptive thresholds. Weights are learned
in floating point, clipped to ``[0, w_limit]`` and quantized to 8-bit codes at
the end; a labeling pass then assigns each neuron to a class.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from snn_fault_sim.encoding import encode_poisson, firing_probabilities
from snn_fault_sim.engine import run_batch
from snn_fault_sim.errors import EngineInvariantError, InvalidArgumentError
from snn_fault_sim.models import (
    UNASSIGNED,
    CleanModelStats,
    EngineConfig,
    LabeledImages,
    LifNeuronState,
    MitigationPolicy,
    NeuronLabelAssignment,
    QuantizedWeightMatrix,
    TrainedModel,
    TrainingConfig,
    Workload,
)
from snn_fault_sim.neuron import lateral_inhibition, lif_step
from snn_fault_sim.readout import assign_labels
from snn_fault_sim.rng import Stream, derive_seed, substream

logger = logging.getLogger(__name__)


class StdpTrainer:
    """Holds the evolving weights and thresholds of one training run."""

    def __init__(self, num_inputs: int, config: TrainingConfig, seed: int) -> None:
        self._config = config
        self._rng = substream(seed, Stream.TRAINING)
        stdp = config.stdp
        init_rng = substream(seed, Stream.WEIGHT_INIT)
        self.weights = init_rng.uniform(0.0, stdp.init_max * stdp.w_limit, (num_inputs, config.network_size))
        self.theta = np.zeros(config.network_size)
        self._decay_pre = math.exp(-1.0 / stdp.tau_pre)
        self._decay_post = math.exp(-1.0 / stdp.tau_post)
        self._normalize()

    def present(self, pixels: np.ndarray) -> int:
        """Show one sample with plasticity on; returns the output spike count.

        Quiet samples are shown again at a higher input rate.
        """
        stdp, encoding = self._config.stdp, self._config.encoding
        spikes = 0
        for attempt in range(stdp.max_retries + 1):
            rate = min(1.0, encoding.max_rate + attempt * stdp.rate_boost)
            probabilities = firing_probabilities(pixels, rate)
            train = self._rng.random((encoding.duration, probabilities.size)) < probabilities
            spikes = self._run(train)
            if spikes >= stdp.min_spikes:
                break
        self._normalize()
        return spikes

    def _run(self, train: np.ndarray) -> int:
        lif, stdp = self._config.lif, self._config.stdp
        state = LifNeuronState.resting(self.theta.shape, lif, theta=self.theta)
        x_pre = np.zeros(self.weights.shape[0])
        x_post = np.zeros(self.weights.shape[1])
        inhibition = np.zeros(self.weights.shape[1])
        total = 0
        for pre in train:
            state, spiked = lif_step(state, lif, self.weights[pre].sum(axis=0), inhibition)
            x_pre = x_pre * self._decay_pre + pre
            x_post = x_post * self._decay_post + spiked
            if pre.any():
                # Depression on presynaptic spikes, floored at 0.
                self.weights[pre] = np.maximum(self.weights[pre] - stdp.nu_pre * x_post, 0.0)
            if spiked.any():
                # Potentiation on postsynaptic spikes, capped at w_limit.
                self.weights[:, spiked] = np.minimum(
                    self.weights[:, spiked] + stdp.nu_post * x_pre[:, np.newaxis], stdp.w_limit
                )
                total += int(spiked.sum())
            if stdp.debug_checks:
                self._check_range()
            inhibition = lateral_inhibition(spiked, lif.inhibition_strength)
        self.theta = state.theta
        return total

    def _normalize(self) -> None:
        stdp = self._config.stdp
        if stdp.weight_norm <= 0:
            return
        sums = self.weights.sum(axis=0)
        factors = np.divide(stdp.weight_norm, sums, out=np.ones_like(sums), where=sums > 0)
        np.minimum(self.weights * factors, stdp.w_limit, out=self.weights)

    def _check_range(self) -> None:
        if self.weights.min() < 0.0 or self.weights.max() > self._config.stdp.w_limit:
            raise EngineInvariantError("STDP drove a weight outside [0, w_limit]")


def label_neurons(
    model: TrainedModel,
    dataset: LabeledImages,
    num_classes: int,
    encoding_duration: int,
    max_rate: float,
    seed: int,
    engine: EngineConfig | None = None,
) -> NeuronLabelAssignment:
    """Labeling pass: clean inference over ``dataset``, no plasticity."""
    pixels = dataset.flat_images()
    trains = np.stack(
        [
            encode_poisson(image, encoding_duration, max_rate, derive_seed(seed, Stream.LABELING, index))
            for index, image in enumerate(pixels)
        ]
    )
    counts = run_batch(model, trains, None, MitigationPolicy(), engine or EngineConfig())
    return assign_labels(counts, dataset.labels, num_classes)


def stdp_train(
    dataset: LabeledImages,
    config: TrainingConfig,
    seed: int,
    workload: Workload | None = None,
) -> TrainedModel:
    """Train the clean SNN and derive its statistics and neuron labels.

    Raises:
        InvalidArgumentError: If the dataset is empty or has fewer than two classes.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("training set is empty")
    if dataset.num_classes < 2:
        raise InvalidArgumentError(f"training set needs at least 2 classes, found {dataset.num_classes}")
    num_classes = int(dataset.labels.max()) + 1
    pixels = dataset.flat_images()

    trainer = StdpTrainer(dataset.num_pixels, config, seed)
    for epoch in range(config.stdp.epochs):
        for index, image in enumerate(pixels):
            trainer.present(image)
            if (index + 1) % config.stdp.log_every == 0:
                logger.info("Epoch %d: trained on %d/%d samples", epoch + 1, index + 1, len(pixels))

    weights = QuantizedWeightMatrix.quantize(trainer.weights, config.stdp.w_limit)
    stats = CleanModelStats.from_codes(weights.codes)
    model = TrainedModel(
        weights=weights,
        theta=trainer.theta.copy(),
        lif=config.lif,
        stats=stats,
        assignment=NeuronLabelAssignment(labels=[UNASSIGNED] * config.network_size, num_classes=num_classes),
        seed=seed,
        w_limit=config.stdp.w_limit,
        workload=workload,
    )

    label_set = dataset.subset(min(config.label_subset or len(dataset), len(dataset)))
    assignment = label_neurons(
        model, label_set, num_classes, config.encoding.duration, config.encoding.max_rate, seed
    )
    unassigned = assignment.labels.count(UNASSIGNED)
    logger.info(
        "Training finished: wgh_max=%d wgh_hp=%d, %d/%d neurons assigned",
        stats.wgh_max, stats.wgh_hp, config.network_size - unassigned, config.network_size,
    )
    return model.model_copy(update={"assignment": assignment})
