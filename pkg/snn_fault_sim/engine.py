"""Behavioural simulation of the SNN compute engine.

Covers the synapse crossbar (column-wise accumulation of 8-bit weights), the
LIF neuron array with faulty-operation semantics, the weight-bounding and
neuron-protection enhancements, and the re-execution (TMR) baseline.
"""

from __future__ import annotations

import logging
from collections import Counter
from typing import Sequence

import numpy as np

from snn_fault_sim.cost import estimate_cost
from snn_fault_sim.errors import EngineInvariantError, InvalidArgumentError
from snn_fault_sim.faults import apply_bit_flips, generate_fault_map
from snn_fault_sim.models import (
    MAX_CODE,
    NO_FAULT,
    CostParams,
    EngineConfig,
    FaultMap,
    InferenceResult,
    LifNeuronState,
    LifParams,
    MitigationKind,
    MitigationPolicy,
    TmrResult,
    TrainedModel,
)
from snn_fault_sim.neuron import detect_and_protect, lateral_inhibition, lif_step
from snn_fault_sim.readout import classify, classify_batch
from snn_fault_sim.rng import Stream, derive_seed

logger = logging.getLogger(__name__)


# -- Synapse part --

def bound_weight(wgh: int, policy: MitigationPolicy) -> int:
    """Weight bounding: replace ``wgh >= wgh_th`` with ``wgh_def``.

    Raises:
        InvalidArgumentError: If the policy is not a BnP technique or the code is not 8-bit.
    """
    if not policy.is_bnp:
        raise InvalidArgumentError(f"weight bounding is not part of policy '{policy.kind.value}'")
    if not 0 <= wgh <= MAX_CODE:
        raise InvalidArgumentError(f"weight code {wgh} is not an 8-bit value")
    return policy.wgh_def if wgh >= policy.wgh_th else wgh


def bound_codes(codes: np.ndarray, policy: MitigationPolicy) -> np.ndarray:
    """Apply the per-synapse bounding comparator/mux to a whole code array."""
    if not policy.is_bnp:
        return codes
    return np.where(codes >= policy.wgh_th, np.uint8(policy.wgh_def), codes).astype(np.uint8)


def check_bounded(codes: np.ndarray, policy: MitigationPolicy) -> None:
    """Debug check: every code reaching an adder is in the safe range or the default."""
    if policy.is_bnp and np.any((codes >= policy.wgh_th) & (codes != policy.wgh_def)):
        raise EngineInvariantError(f"unbounded weight reached the accumulator under {policy.kind.value}")


def accumulate_codes(spikes: np.ndarray, codes: np.ndarray, policy: MitigationPolicy) -> np.ndarray:
    """Integer column sums of the (bounded) codes of the active inputs.

    Args:
        spikes: Boolean input spikes; the last axis is the input axis.
        codes: (inputs x neurons) weight codes.
        policy: Active mitigation policy.

    Returns:
        Integer array of shape ``spikes.shape[:-1] + (neurons,)``.
    """
    spikes = np.asarray(spikes)
    if spikes.shape[-1] != codes.shape[0]:
        raise InvalidArgumentError(f"{spikes.shape[-1]} input spikes for {codes.shape[0]} synapse rows")
    bounded = bound_codes(codes, policy)
    # Every partial sum is an integer below 2**24, so float32 products are exact.
    sums = spikes.astype(np.float32) @ bounded.astype(np.float32)
    return np.rint(sums).astype(np.int64)


def column_accumulate(
    spikes: np.ndarray,
    weights: np.ndarray,
    policy: MitigationPolicy,
    scale: float = 1.0,
) -> float:
    """Potential delivered to one neuron: scaled sum of the active synapses' codes."""
    column = np.asarray(weights)
    if np.shape(spikes) != column.shape:
        raise InvalidArgumentError(f"spike vector {np.shape(spikes)} does not match column {column.shape}")
    total = accumulate_codes(np.asarray(spikes)[np.newaxis, :], column[:, np.newaxis], policy)
    return float(total[0, 0]) * scale


def effective_codes(
    model: TrainedModel,
    fault_map: FaultMap | None,
    policy: MitigationPolicy,
    config: EngineConfig,
) -> np.ndarray:
    """Weight codes as seen by the adders: faulty registers, then the bounding mux."""
    weights = model.weights if fault_map is None else apply_bit_flips(model.weights, fault_map)
    codes = bound_codes(weights.codes, policy)
    if config.debug_checks:
        check_bounded(codes, policy)
    return codes


# -- Neuron part --

def simulate(
    currents: np.ndarray,
    params: LifParams,
    theta: np.ndarray,
    fault_codes: np.ndarray,
    protect: bool,
    detect_cycles: int = 2,
) -> np.ndarray:
    """Run the neuron array over (batch x timesteps x neurons) input currents.

    Returns per-neuron spike counts of shape (batch x neurons).
    """
    batch, duration, neurons = currents.shape
    state = LifNeuronState.resting((batch, neurons), params, theta=theta, fault=fault_codes)
    counts = np.zeros((batch, neurons), dtype=np.int64)
    inhibition = np.zeros((batch, neurons))
    for t in range(duration):
        state, spiked = lif_step(state, params, currents[:, t, :], inhibition)
        if protect:
            state = detect_and_protect(state, params, detect_cycles)
        counts += spiked
        inhibition = lateral_inhibition(spiked, params.inhibition_strength)
    return counts


def _check_trains(model: TrainedModel, spike_trains: np.ndarray) -> None:
    if spike_trains.ndim != 3 or spike_trains.shape[-1] != model.weights.num_inputs:
        raise InvalidArgumentError(
            f"spike trains of shape {spike_trains.shape} do not fit a network with "
            f"{model.weights.num_inputs} inputs"
        )


def run_batch(
    model: TrainedModel,
    spike_trains: np.ndarray,
    fault_map: FaultMap | None,
    policy: MitigationPolicy,
    config: EngineConfig,
) -> np.ndarray:
    """Spike counts for a batch of inputs that all see the same fault map.

    Args:
        model: Clean trained model.
        spike_trains: Boolean (batch x timesteps x inputs) input spikes.
        fault_map: Soft errors of this execution, or None for a fault-free run.
        policy: Active mitigation; TMR is handled by ``run_tmr``.
        config: Engine configuration.

    Returns:
        (batch x neurons) spike counts.
    """
    spike_trains = np.asarray(spike_trains, dtype=bool)
    _check_trains(model, spike_trains)
    codes = effective_codes(model, fault_map, policy, config)
    fault_codes = np.full(model.network_size, NO_FAULT, dtype=np.int8) if fault_map is None else (
        fault_map.neuron_fault_codes()
    )
    counts = []
    for start in range(0, len(spike_trains), config.batch_size):
        chunk = spike_trains[start : start + config.batch_size]
        currents = accumulate_codes(chunk, codes, policy) * model.weights.scale
        counts.append(
            simulate(
                currents,
                model.lif.for_inference(),
                model.theta,
                fault_codes,
                protect=policy.is_bnp,
                detect_cycles=config.reset_fault_detect_cycles,
            )
        )
    return np.concatenate(counts) if counts else np.zeros((0, model.network_size), dtype=np.int64)


def run_inference(
    model: TrainedModel,
    spike_train: np.ndarray,
    fault_map: FaultMap | None,
    policy: MitigationPolicy,
    config: EngineConfig,
    cost_params: CostParams | None = None,
) -> InferenceResult:
    """Present one input to the (possibly faulty) engine under a mitigation policy.

    Raises:
        InvalidArgumentError: On dimension mismatches or a TMR policy.
    """
    if policy.kind == MitigationKind.REEXECUTION_TMR:
        raise InvalidArgumentError("use run_tmr for re-execution")
    train = np.asarray(spike_train, dtype=bool)
    counts = run_batch(model, train[np.newaxis], fault_map, policy, config)[0]
    cost = estimate_cost(policy.kind, model.weights.dims, train.shape[0], cost_params or CostParams(), config)
    return InferenceResult(spike_counts=counts, label=classify(counts, model.assignment), cost=cost)


# -- Re-execution baseline --

def majority_vote(labels: Sequence[int]) -> int:
    """Most common label; when no label has a majority the first execution wins."""
    if not labels:
        raise InvalidArgumentError("no votes to count")
    label, votes = Counter(labels).most_common(1)[0]
    return label if votes > len(labels) // 2 else labels[0]


def tmr_labels(
    model: TrainedModel,
    spike_trains: np.ndarray,
    fault_rate: float,
    config: EngineConfig,
    seeds: Sequence[int],
) -> np.ndarray:
    """Predicted label of every redundant execution, shape (batch x copies).

    Input ``b`` runs its copies on fresh fault maps drawn from substreams of
    ``seeds[b]``; execution order does not influence any map.
    """
    spike_trains = np.asarray(spike_trains, dtype=bool)
    _check_trains(model, spike_trains)
    if len(seeds) != len(spike_trains):
        raise InvalidArgumentError(f"{len(seeds)} seeds for {len(spike_trains)} inputs")
    policy = MitigationPolicy(kind=MitigationKind.NO_MITIGATION)
    copies = policy.tmr_copies
    dims = model.weights.dims
    params = model.lif.for_inference()

    labels = np.empty((len(spike_trains), copies), dtype=np.int64)
    for start in range(0, len(spike_trains), max(1, config.batch_size // copies)):
        stop = min(start + max(1, config.batch_size // copies), len(spike_trains))
        currents, faults = [], []
        for b in range(start, stop):
            for copy in range(copies):
                fault_map = generate_fault_map(dims, fault_rate, derive_seed(seeds[b], Stream.TMR, copy))
                codes = effective_codes(model, fault_map, policy, config)
                currents.append(accumulate_codes(spike_trains[b], codes, policy) * model.weights.scale)
                faults.append(fault_map.neuron_fault_codes())
        counts = simulate(np.stack(currents), params, model.theta, np.stack(faults), protect=False)
        labels[start:stop] = classify_batch(counts, model.assignment).reshape(stop - start, copies)
    return labels


def run_tmr(
    model: TrainedModel,
    spike_train: np.ndarray,
    fault_rate: float,
    config: EngineConfig,
    seed: int,
    cost_params: CostParams | None = None,
) -> TmrResult:
    """Three unmitigated executions on independent fault maps, then a label vote."""
    train = np.asarray(spike_train, dtype=bool)
    votes = [int(v) for v in tmr_labels(model, train[np.newaxis], fault_rate, config, [seed])[0]]
    cost = estimate_cost(
        MitigationKind.REEXECUTION_TMR, model.weights.dims, train.shape[0], cost_params or CostParams(), config
    )
    return TmrResult(label=majority_vote(votes), votes=votes, cost=cost)
