"""LIF neuron datapath with faulty-operation semantics and neuron protection.

All functions operate on whole populations: every array in a
``LifNeuronState`` shares one shape, typically ``(neurons,)`` during training
or ``(batch, neurons)`` during inference.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict

from snn_fault_sim.errors import InvalidArgumentError
from snn_fault_sim.models import LifNeuronState, LifParams, NeuronFaultKind


class FaultMasks(BaseModel):
    """Which of the four neuron operations still work, per neuron."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    integrate: np.ndarray
    leak: np.ndarray
    reset: np.ndarray
    emit: np.ndarray


def apply_neuron_fault_semantics(state: LifNeuronState) -> FaultMasks:
    """Translate the per-neuron fault codes into operation-enable masks.

    A faulty 'Vmem increase' never integrates, a faulty 'Vmem leak' never
    leaks, a faulty 'Vmem reset' keeps its potential after firing and a faulty
    'spike generation' never drives its output.
    """
    fault = state.fault
    return FaultMasks.model_construct(
        integrate=fault != NeuronFaultKind.VMEM_INCREASE,
        leak=fault != NeuronFaultKind.VMEM_LEAK,
        reset=fault != NeuronFaultKind.VMEM_RESET,
        emit=fault != NeuronFaultKind.SPIKE_GENERATION,
    )


def lif_step(
    state: LifNeuronState,
    params: LifParams,
    input_current: np.ndarray | float,
    inhibition: np.ndarray | float = 0.0,
) -> tuple[LifNeuronState, np.ndarray]:
    """Advance every neuron by one timestep.

    Returns the new state and the boolean array of emitted spikes. The input
    state is not modified.
    """
    current = np.broadcast_to(np.asarray(input_current, dtype=np.float64), state.v_mem.shape)
    if np.any(current < 0):
        raise InvalidArgumentError("input_current must be non-negative")
    masks = apply_neuron_fault_semantics(state)

    active = state.refractory_remaining == 0
    refractory = np.where(active, 0, state.refractory_remaining - 1)

    # A refractory neuron neither integrates nor leaks.
    drive = current * masks.integrate - params.leak_amount * masks.leak - inhibition
    v_mem = np.where(active, np.maximum(params.v_rest, state.v_mem + drive), state.v_mem)

    comparator = active & (v_mem >= params.v_threshold + state.theta)
    spiked = comparator & masks.emit & ~state.spike_disabled
    resets = comparator & masks.reset
    v_mem = np.where(resets, params.v_reset, v_mem)
    refractory = np.where(resets, params.t_refractory, refractory)
    # Homeostasis decays after the comparison, so a step never lowers its own threshold.
    theta = state.theta * params.theta_decay + params.theta_plus * spiked

    new_state = LifNeuronState.model_construct(
        v_mem=v_mem,
        theta=theta,
        refractory_remaining=refractory,
        fault=state.fault,
        spike_disabled=state.spike_disabled,
        comparator=comparator,
        reset_streak=state.reset_streak,
    )
    return new_state, spiked


def detect_and_protect(state: LifNeuronState, params: LifParams, detect_cycles: int = 2) -> LifNeuronState:
    """Disable spike generation of neurons whose reset operation does not take.

    The monitor watches the threshold comparator and the potential that
    follows it. A comparator hit that leaves ``v_mem`` at or above threshold is
    a failed reset; once ``detect_cycles`` failed resets accumulate without an
    intervening successful reset, the neuron stays silent for the rest of the
    presentation.
    """
    if detect_cycles < 2:
        raise InvalidArgumentError(f"detect_cycles must be at least 2, got {detect_cycles}")
    failed = state.comparator & (state.v_mem >= params.v_threshold + state.theta)
    succeeded = state.comparator & ~failed
    streak = np.where(succeeded, 0, state.reset_streak + failed)
    return state.model_copy(
        update={
            "reset_streak": streak,
            "spike_disabled": state.spike_disabled | (streak >= detect_cycles),
        }
    )


def lateral_inhibition(spiked: np.ndarray, strength: float) -> np.ndarray:
    """Inhibition each neuron receives next step: ``strength`` if any *other* neuron spiked.

    The last axis is the neuron axis.
    """
    totals = spiked.sum(axis=-1, keepdims=True)
    return strength * ((totals - spiked) > 0)
