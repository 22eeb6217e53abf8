"""Transient-fault maps: generation, application to weight registers, file format."""

from __future__ import annotations

import json
import logging
from typing import Iterable, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from snn_fault_sim.errors import InvalidArgumentError, SimulationError
from snn_fault_sim.models import (
    FAULT_KIND_NAMES,
    FAULT_KINDS_BY_NAME,
    NUM_WEIGHT_BITS,
    CrossbarDims,
    FaultMap,
    FaultTarget,
    NeuronFaultKind,
    QuantizedWeightMatrix,
)
from snn_fault_sim.rng import substream

logger = logging.getLogger(__name__)

FAULT_MAP_FORMAT = "snn-fault-map"
FAULT_MAP_VERSION = 1


class FaultMapParseError(SimulationError):
    """Raised when a fault-map document cannot be parsed."""


def generate_fault_map(
    dims: CrossbarDims,
    fault_rate: float,
    seed: int,
    target: FaultTarget = FaultTarget.BOTH,
    neuron_kinds: Iterable[NeuronFaultKind] | None = None,
) -> FaultMap:
    """Sample soft errors over every weight bit and neuron operation.

    Each of the ``rows * cols * 8`` register bits and each of the ``cols``
    neurons faults independently with probability ``fault_rate``; a faulty
    neuron gets one kind drawn uniformly from ``neuron_kinds``. Draws are made
    for every location whatever the target, so a restricted map is a subset of
    the full map for the same seed.

    Raises:
        InvalidArgumentError: If the rate lies outside [0, 1] or no neuron kinds are allowed.
    """
    if not 0.0 <= fault_rate <= 1.0:
        raise InvalidArgumentError(f"fault_rate must be in [0, 1], got {fault_rate}")
    kinds = sorted(NeuronFaultKind) if neuron_kinds is None else sorted(set(neuron_kinds))
    if not kinds:
        raise InvalidArgumentError("at least one neuron fault kind must be allowed")

    rng = substream(seed)
    bit_hits = rng.random((dims.rows, dims.cols, NUM_WEIGHT_BITS)) < fault_rate
    neuron_hits = rng.random(dims.cols) < fault_rate
    kind_draws = rng.integers(0, len(kinds), size=dims.cols)

    flips = np.argwhere(bit_hits) if target != FaultTarget.NEURONS else np.empty((0, 3), dtype=np.int64)
    neuron_faults: dict[int, NeuronFaultKind] = {}
    if target != FaultTarget.SYNAPSES:
        neuron_faults = {int(n): kinds[int(kind_draws[n])] for n in np.flatnonzero(neuron_hits)}

    logger.debug(
        "Generated fault map %s rate=%g seed=%d: %d bit flips, %d faulty neurons",
        dims, fault_rate, seed, len(flips), len(neuron_faults),
    )
    return FaultMap(
        rows=dims.rows,
        cols=dims.cols,
        fault_rate=fault_rate,
        seed=seed,
        target=target,
        synapse_flips=flips,
        neuron_faults=neuron_faults,
    )


def apply_bit_flips(weights: QuantizedWeightMatrix, fault_map: FaultMap) -> QuantizedWeightMatrix:
    """Return a copy of the weight registers with every listed bit inverted.

    Raises:
        InvalidArgumentError: If the map was generated for different dimensions.
    """
    if (fault_map.rows, fault_map.cols) != weights.codes.shape:
        raise InvalidArgumentError(
            f"fault map for {fault_map.dims} does not fit weights of shape {weights.codes.shape}"
        )
    codes = np.array(weights.codes, copy=True)
    flips = fault_map.synapse_flips
    if len(flips):
        masks = np.left_shift(1, flips[:, 2]).astype(np.uint8)
        np.bitwise_xor.at(codes, (flips[:, 0], flips[:, 1]), masks)
    return weights.with_codes(codes)


# -- File format --

class _NeuronFaultEntry(BaseModel):
    neuron: int = Field(ge=0)
    kind: Literal["vmem_increase", "vmem_leak", "vmem_reset", "spike_generation"]


class _FaultMapDocument(BaseModel):
    format: Literal["snn-fault-map"]
    version: Literal[1]
    rows: int = Field(gt=0)
    cols: int = Field(gt=0)
    fault_rate: float = Field(ge=0.0, le=1.0)
    seed: int = Field(ge=0, lt=2**64)
    target: FaultTarget
    synapse_flips: list[tuple[int, int, int]]
    neuron_faults: list[_NeuronFaultEntry]


def serialize_fault_map(fault_map: FaultMap) -> bytes:
    """Encode a fault map as versioned JSON text, one location per line."""
    header = {
        "format": FAULT_MAP_FORMAT,
        "version": FAULT_MAP_VERSION,
        "rows": fault_map.rows,
        "cols": fault_map.cols,
        "fault_rate": fault_map.fault_rate,
        "seed": fault_map.seed,
        "target": fault_map.target.value,
    }
    lines = ["{"]
    lines += [f"  {json.dumps(key)}: {json.dumps(value)}," for key, value in header.items()]
    flips = [f"    [{r}, {c}, {b}]" for r, c, b in fault_map.synapse_flips.tolist()]
    lines.append('  "synapse_flips": [' + ("\n" + ",\n".join(flips) + "\n  ]," if flips else "],"))
    neurons = [
        f'    {{"neuron": {n}, "kind": "{FAULT_KIND_NAMES[kind]}"}}'
        for n, kind in sorted(fault_map.neuron_faults.items())
    ]
    lines.append('  "neuron_faults": [' + ("\n" + ",\n".join(neurons) + "\n  ]" if neurons else "]"))
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_fault_map(data: bytes) -> FaultMap:
    """Parse a fault-map document.

    Raises:
        FaultMapParseError: On malformed text, a wrong format/version, or
            locations that do not fit the declared dimensions. The message
            names the offending field.
    """
    try:
        document = _FaultMapDocument.model_validate_json(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "<document>"
        raise FaultMapParseError(f"invalid fault map field '{field}': {error['msg']}") from exc

    if len({entry.neuron for entry in document.neuron_faults}) != len(document.neuron_faults):
        raise FaultMapParseError("invalid fault map field 'neuron_faults': duplicate neuron entries")
    try:
        return FaultMap(
            rows=document.rows,
            cols=document.cols,
            fault_rate=document.fault_rate,
            seed=document.seed,
            target=document.target,
            synapse_flips=np.asarray(document.synapse_flips, dtype=np.int64).reshape(-1, 3),
            neuron_faults={entry.neuron: FAULT_KINDS_BY_NAME[entry.kind] for entry in document.neuron_faults},
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "locations"
        raise FaultMapParseError(f"invalid fault map field '{field}': {error['msg']}") from exc
