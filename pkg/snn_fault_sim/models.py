"""Pydantic models for the SNN compute-engine simulator."""

from __future__ import annotations

import math
from enum import Enum, IntEnum
from statistics import fmean, pstdev
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# -- Hardware enumerations --

NUM_WEIGHT_BITS = 8
MAX_CODE = 2**NUM_WEIGHT_BITS - 1
NO_FAULT = -1
NO_PREDICTION = -1
UNASSIGNED = -1


class NeuronFaultKind(IntEnum):
    """The four neuron operations a soft error can corrupt."""

    VMEM_INCREASE = 0
    VMEM_LEAK = 1
    VMEM_RESET = 2
    SPIKE_GENERATION = 3


FAULT_KIND_NAMES: dict[int, str] = {
    NeuronFaultKind.VMEM_INCREASE: "vmem_increase",
    NeuronFaultKind.VMEM_LEAK: "vmem_leak",
    NeuronFaultKind.VMEM_RESET: "vmem_reset",
    NeuronFaultKind.SPIKE_GENERATION: "spike_generation",
}

FAULT_KINDS_BY_NAME: dict[str, NeuronFaultKind] = {
    name: NeuronFaultKind(kind) for kind, name in FAULT_KIND_NAMES.items()
}


class LocationKind(str, Enum):
    """Kinds of potential fault locations in the compute engine."""

    SYNAPSE_BIT = "synapse_bit"
    NEURON_OP = "neuron_op"


class FaultTarget(str, Enum):
    """Which part of the compute engine a fault map may touch."""

    SYNAPSES = "synapses"
    NEURONS = "neurons"
    BOTH = "both"


class MitigationKind(str, Enum):
    """Soft-error mitigation techniques."""

    NO_MITIGATION = "none"
    BNP1 = "bnp1"
    BNP2 = "bnp2"
    BNP3 = "bnp3"
    REEXECUTION_TMR = "tmr"


POLICY_NAMES: dict[MitigationKind, str] = {
    MitigationKind.NO_MITIGATION: "No Mitigation",
    MitigationKind.BNP1: "BnP1",
    MitigationKind.BNP2: "BnP2",
    MitigationKind.BNP3: "BnP3",
    MitigationKind.REEXECUTION_TMR: "Re-execution (TMR)",
}

BNP_KINDS: frozenset[MitigationKind] = frozenset({MitigationKind.BNP1, MitigationKind.BNP2, MitigationKind.BNP3})

# Declaration order doubles as the report/sort order.
POLICY_ORDER: dict[MitigationKind, int] = {kind: index for index, kind in enumerate(MitigationKind)}


class Workload(str, Enum):
    """Supported image-classification workloads."""

    MNIST = "mnist"
    FASHION_MNIST = "fashion-mnist"


# -- Parameter blocks --

class LifParams(BaseModel):
    """Leaky integrate-and-fire parameters, in potential units and timesteps."""

    v_threshold: float = 20.0
    v_reset: float = 0.0
    v_rest: float = 0.0
    leak_amount: float = Field(default=1.0, ge=0.0)
    t_refractory: int = Field(default=2, ge=0)
    inhibition_strength: float = Field(default=30.0, ge=0.0)
    theta_plus: float = Field(default=0.05, ge=0.0)
    theta_decay: float = Field(default=0.999999, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_potentials(self) -> LifParams:
        if not self.v_reset <= self.v_rest < self.v_threshold:
            raise ValueError("LIF potentials must satisfy v_reset <= v_rest < v_threshold")
        return self

    def for_inference(self) -> LifParams:
        """Freeze homeostasis: thresholds keep their trained offsets."""
        return self.model_copy(update={"theta_plus": 0.0, "theta_decay": 1.0})


class StdpParams(BaseModel):
    """Pair-based STDP and training-loop parameters."""

    w_limit: float = Field(default=1.0, gt=0.0)
    nu_pre: float = Field(default=0.0001, ge=0.0)
    nu_post: float = Field(default=0.01, ge=0.0)
    tau_pre: float = Field(default=4.0, gt=0.0)
    tau_post: float = Field(default=4.0, gt=0.0)
    init_max: float = Field(default=0.3, gt=0.0)
    weight_norm: float = Field(default=78.0, ge=0.0)
    epochs: int = Field(default=1, ge=1)
    min_spikes: int = Field(default=5, ge=0)
    rate_boost: float = Field(default=0.125, ge=0.0)
    max_retries: int = Field(default=3, ge=0)
    log_every: int = Field(default=500, ge=1)
    debug_checks: bool = False


class EncodingParams(BaseModel):
    """Poisson rate-coding parameters."""

    duration: int = Field(default=100, ge=1)
    max_rate: float = Field(default=0.25, gt=0.0, le=1.0)


class EngineConfig(BaseModel):
    """Compute-engine geometry and simulation knobs."""

    crossbar_rows: int = Field(default=256, gt=0)
    crossbar_cols: int = Field(default=256, gt=0)
    reset_fault_detect_cycles: int = Field(default=2, ge=2)
    batch_size: int = Field(default=64, ge=1)
    debug_checks: bool = False


class CostParams(BaseModel):
    """Parametric latency/energy/area constants.

    The factors default to the relative overheads reported for the hardware
    enhancements; the absolute constants describe a nominal 200 MHz engine.
    """

    base_cycles_per_timestep: int = Field(default=256, gt=0)
    cycle_time: float = Field(default=5e-9, gt=0.0)
    base_power: float = Field(default=0.02, gt=0.0)
    bnp_latency_factor: float = Field(default=1.06, ge=1.0)
    bnp_energy_factor: float = Field(default=1.6, ge=1.0)
    tmr_factor: int = 3
    area_base: float = Field(default=1.0, gt=0.0)
    area_bnp1: float = Field(default=1.14, ge=1.0)
    area_bnp23: float = Field(default=1.18, ge=1.0)

    @field_validator("tmr_factor")
    @classmethod
    def _three_copies(cls, value: int) -> int:
        if value != 3:
            raise ValueError("tmr_factor is fixed at 3")
        return value


class TrainingConfig(BaseModel):
    """Everything stdp_train needs besides the data and the seed."""

    network_size: int = Field(default=100, gt=0)
    label_subset: Optional[int] = Field(default=None, gt=0)
    lif: LifParams = Field(default_factory=LifParams)
    stdp: StdpParams = Field(default_factory=StdpParams)
    encoding: EncodingParams = Field(default_factory=EncodingParams)


# -- Arrays --

class _ArrayModel(BaseModel):
    """Base for models holding numpy arrays; equality compares array contents."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        for name in type(self).model_fields:
            mine, theirs = getattr(self, name), getattr(other, name)
            if isinstance(mine, np.ndarray):
                if not np.array_equal(mine, theirs):
                    return False
            elif mine != theirs:
                return False
        return True

    __hash__ = None  # type: ignore[assignment]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


class QuantizedWeightMatrix(_ArrayModel):
    """8-bit synaptic weight codes laid out as input rows x neuron columns."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    codes: np.ndarray
    scale: float = Field(gt=0.0)

    @field_validator("codes", mode="before")
    @classmethod
    def _as_codes(cls, value: Any) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 2 or 0 in array.shape:
            raise ValueError(f"weight codes must be a non-empty 2-D matrix, got shape {array.shape}")
        if array.dtype != np.uint8:
            if not np.issubdtype(array.dtype, np.integer) or array.min() < 0 or array.max() > MAX_CODE:
                raise ValueError(f"weight codes must be integers in [0, {MAX_CODE}]")
            array = array.astype(np.uint8)
        return _readonly(array)

    @property
    def num_inputs(self) -> int:
        return int(self.codes.shape[0])

    @property
    def num_neurons(self) -> int:
        return int(self.codes.shape[1])

    @property
    def dims(self) -> CrossbarDims:
        return CrossbarDims(rows=self.num_inputs, cols=self.num_neurons)

    @classmethod
    def quantize(cls, weights: np.ndarray, w_limit: float) -> QuantizedWeightMatrix:
        """Linear round-half-up quantization of [0, w_limit] onto 0..255."""
        scale = w_limit / MAX_CODE
        codes = np.floor(np.clip(weights, 0.0, w_limit) / scale + 0.5)
        return cls(codes=np.clip(codes, 0, MAX_CODE).astype(np.uint8), scale=scale)

    def dequantize(self) -> np.ndarray:
        return self.codes.astype(np.float64) * self.scale

    def with_codes(self, codes: np.ndarray) -> QuantizedWeightMatrix:
        """Same scale, new contents (e.g. after bit flips)."""
        if codes.shape != self.codes.shape:
            raise ValueError(f"shape {codes.shape} does not match {self.codes.shape}")
        return QuantizedWeightMatrix(codes=codes, scale=self.scale)


class CleanModelStats(BaseModel):
    """Weight statistics of the fault-free trained model."""

    wgh_max: int = Field(ge=0, le=MAX_CODE)
    wgh_hp: int = Field(ge=0, le=MAX_CODE)
    histogram: list[int] = Field(min_length=MAX_CODE + 1, max_length=MAX_CODE + 1)

    @model_validator(mode="after")
    def _hp_within_max(self) -> CleanModelStats:
        if self.wgh_hp > self.wgh_max:
            raise ValueError("wgh_hp must not exceed wgh_max")
        return self

    @classmethod
    def from_codes(cls, codes: np.ndarray, coarse_bins: int = 16) -> CleanModelStats:
        """wgh_hp is the centre code of the fullest coarse bin, ignoring the bin holding zero."""
        flat = np.asarray(codes, dtype=np.uint8).ravel()
        histogram = np.bincount(flat, minlength=MAX_CODE + 1)
        wgh_max = int(flat.max())
        width = (MAX_CODE + 1) // coarse_bins
        coarse = histogram.reshape(coarse_bins, width).sum(axis=1)
        if coarse[1:].any():
            best = 1 + int(np.argmax(coarse[1:]))
        else:
            best = 0
        wgh_hp = min(best * width + width // 2, wgh_max)
        return cls(wgh_max=wgh_max, wgh_hp=wgh_hp, histogram=[int(c) for c in histogram])


class NeuronLabelAssignment(BaseModel):
    """Class label per excitatory neuron (-1 for neurons that never responded)."""

    labels: list[int]
    num_classes: int = Field(ge=2)

    @model_validator(mode="after")
    def _labels_in_range(self) -> NeuronLabelAssignment:
        for label in self.labels:
            if not UNASSIGNED <= label < self.num_classes:
                raise ValueError(f"label {label} outside [-1, {self.num_classes})")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)


class LifNeuronState(_ArrayModel):
    """Per-neuron dynamic state; every field is an array of the population shape.

    ``comparator`` and ``reset_streak`` belong to the hardened protection
    logic and are never targeted by fault maps.
    """

    v_mem: np.ndarray
    theta: np.ndarray
    refractory_remaining: np.ndarray
    fault: np.ndarray
    spike_disabled: np.ndarray
    comparator: np.ndarray
    reset_streak: np.ndarray

    @classmethod
    def resting(
        cls,
        shape: tuple[int, ...],
        params: LifParams,
        theta: np.ndarray | None = None,
        fault: np.ndarray | None = None,
    ) -> LifNeuronState:
        """Fresh state at the start of an input presentation."""
        return cls.model_construct(
            v_mem=np.full(shape, params.v_rest, dtype=np.float64),
            theta=np.broadcast_to(np.zeros(shape) if theta is None else theta, shape).astype(np.float64),
            refractory_remaining=np.zeros(shape, dtype=np.int64),
            fault=np.broadcast_to(np.full(shape, NO_FAULT) if fault is None else fault, shape).astype(np.int8),
            spike_disabled=np.zeros(shape, dtype=bool),
            comparator=np.zeros(shape, dtype=bool),
            reset_streak=np.zeros(shape, dtype=np.int64),
        )


# -- Fault model --

class CrossbarDims(BaseModel):
    """Dimensions of a weight matrix: input rows x neuron columns."""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(gt=0)
    cols: int = Field(gt=0)

    @classmethod
    def parse(cls, text: str) -> CrossbarDims:
        """Parse ``"784x100"``."""
        rows, sep, cols = text.lower().partition("x")
        if not sep:
            raise ValueError(f"dimensions must look like ROWSxCOLS, got {text!r}")
        return cls(rows=int(rows), cols=int(cols))

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}"


class FaultLocation(BaseModel):
    """One potential fault location: a weight-register bit or a neuron operation."""

    model_config = ConfigDict(frozen=True)

    kind: LocationKind
    col: int = Field(ge=0)
    row: Optional[int] = Field(default=None, ge=0)
    bit: Optional[int] = Field(default=None, ge=0, le=NUM_WEIGHT_BITS - 1)

    @model_validator(mode="after")
    def _fields_match_kind(self) -> FaultLocation:
        synapse = self.kind == LocationKind.SYNAPSE_BIT
        if synapse != (self.row is not None and self.bit is not None):
            raise ValueError("row and bit are required for synapse bits and forbidden for neuron ops")
        return self


class FaultMap(_ArrayModel):
    """Sampled soft errors for one execution of the compute engine."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rows: int = Field(gt=0)
    cols: int = Field(gt=0)
    fault_rate: float = Field(ge=0.0, le=1.0)
    seed: int = Field(ge=0, lt=2**64)
    target: FaultTarget = FaultTarget.BOTH
    synapse_flips: np.ndarray
    neuron_faults: dict[int, NeuronFaultKind] = Field(default_factory=dict)

    @field_validator("synapse_flips", mode="before")
    @classmethod
    def _as_flips(cls, value: Any) -> np.ndarray:
        array = np.asarray(value, dtype=np.int64)
        if array.size == 0:
            array = array.reshape(0, 3)
        if array.ndim != 2 or array.shape[1] != 3:
            raise ValueError("synapse_flips must be a sequence of (row, col, bit) triples")
        if len(array) == 0:
            return _readonly(array)
        unique = np.unique(array, axis=0)
        if len(unique) != len(array):
            raise ValueError("synapse_flips contains duplicate locations")
        return _readonly(unique)

    @model_validator(mode="after")
    def _locations_in_range(self) -> FaultMap:
        flips = self.synapse_flips
        if len(flips):
            if flips.min() < 0:
                raise ValueError("synapse_flips contains negative indices")
            if flips[:, 0].max() >= self.rows or flips[:, 1].max() >= self.cols:
                raise ValueError(f"synapse_flips out of range for {self.rows}x{self.cols}")
            if flips[:, 2].max() >= NUM_WEIGHT_BITS:
                raise ValueError("synapse_flips bit index must be in [0, 7]")
        for neuron in self.neuron_faults:
            if not 0 <= neuron < self.cols:
                raise ValueError(f"neuron_faults index {neuron} out of range for {self.cols} neurons")
        return self

    @property
    def dims(self) -> CrossbarDims:
        return CrossbarDims(rows=self.rows, cols=self.cols)

    @property
    def is_empty(self) -> bool:
        return len(self.synapse_flips) == 0 and not self.neuron_faults

    def neuron_fault_codes(self) -> np.ndarray:
        """Per-neuron fault kind codes, NO_FAULT where healthy."""
        codes = np.full(self.cols, NO_FAULT, dtype=np.int8)
        for neuron, kind in self.neuron_faults.items():
            codes[neuron] = int(kind)
        return codes

    def locations(self) -> list[FaultLocation]:
        synapses = [
            FaultLocation(kind=LocationKind.SYNAPSE_BIT, row=int(r), col=int(c), bit=int(b))
            for r, c, b in self.synapse_flips
        ]
        neurons = [FaultLocation(kind=LocationKind.NEURON_OP, col=n) for n in sorted(self.neuron_faults)]
        return synapses + neurons


# -- Mitigation --

class MitigationPolicy(BaseModel):
    """Active mitigation technique with its hardened bounding registers."""

    model_config = ConfigDict(frozen=True)

    kind: MitigationKind = MitigationKind.NO_MITIGATION
    wgh_th: int = Field(default=MAX_CODE, ge=0, le=MAX_CODE)
    wgh_def: int = Field(default=0, ge=0, le=MAX_CODE)
    tmr_copies: int = 3

    @model_validator(mode="after")
    def _check_registers(self) -> MitigationPolicy:
        if self.tmr_copies != 3:
            raise ValueError("tmr_copies is fixed at 3")
        if self.kind in BNP_KINDS and self.wgh_def > self.wgh_th:
            raise ValueError("wgh_def must lie in the safe range (wgh_def <= wgh_th)")
        if self.kind == MitigationKind.BNP1 and self.wgh_def != 0:
            raise ValueError("BnP1 replaces bounded weights with zero")
        return self

    @property
    def is_bnp(self) -> bool:
        return self.kind in BNP_KINDS

    @classmethod
    def from_stats(cls, kind: MitigationKind, stats: CleanModelStats) -> MitigationPolicy:
        """Threshold at the clean maximum; replacement value per technique."""
        defaults = {
            MitigationKind.BNP1: 0,
            MitigationKind.BNP2: stats.wgh_max,
            MitigationKind.BNP3: stats.wgh_hp,
        }
        return cls(kind=kind, wgh_th=stats.wgh_max, wgh_def=defaults.get(kind, 0))


# -- Cost --

class CostReport(BaseModel):
    """Latency, energy and area of one inference under a policy."""

    latency: float = Field(ge=0.0)
    energy: float = Field(ge=0.0)
    area: float = Field(ge=0.0)
    cycles: int = Field(ge=0)
    tiles: int = Field(ge=0)

    @property
    def average_power(self) -> float:
        return self.energy / self.latency if self.latency else 0.0


# -- Execution results --

class InferenceResult(_ArrayModel):
    """Outcome of presenting one input to the engine."""

    spike_counts: np.ndarray
    label: int
    cost: CostReport


class TmrResult(BaseModel):
    """Outcome of three redundant executions and a majority vote."""

    label: int
    votes: list[int]
    cost: CostReport


# -- Datasets and trained models --

class LabeledImages(_ArrayModel):
    """Images (n x rows x cols, uint8) with their integer labels."""

    images: np.ndarray
    labels: np.ndarray

    @model_validator(mode="after")
    def _counts_match(self) -> LabeledImages:
        if self.images.ndim < 2:
            raise ValueError("images must have a sample axis and at least one pixel axis")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        return self

    def __len__(self) -> int:
        return int(len(self.labels))

    @property
    def num_pixels(self) -> int:
        return int(np.prod(self.images.shape[1:]))

    @property
    def num_classes(self) -> int:
        return int(len(np.unique(self.labels)))

    def flat_images(self) -> np.ndarray:
        return self.images.reshape(len(self.images), -1)

    def subset(self, count: int) -> LabeledImages:
        if count > len(self):
            raise ValueError(f"requested {count} samples but only {len(self)} are available")
        return LabeledImages(images=self.images[:count], labels=self.labels[:count])


class TrainedModel(_ArrayModel):
    """A clean SNN: quantized weights, frozen thresholds, statistics and readout."""

    weights: QuantizedWeightMatrix
    theta: np.ndarray
    lif: LifParams
    stats: CleanModelStats
    assignment: NeuronLabelAssignment
    seed: int = Field(ge=0, lt=2**64)
    w_limit: float = Field(gt=0.0)
    workload: Optional[Workload] = None

    @model_validator(mode="after")
    def _dims_agree(self) -> TrainedModel:
        n = self.weights.num_neurons
        if self.theta.shape != (n,) or len(self.assignment.labels) != n:
            raise ValueError("theta and assignment must have one entry per neuron")
        return self

    @property
    def network_size(self) -> int:
        return self.weights.num_neurons


# -- Sweep and analysis results --

class SweepRow(BaseModel):
    """One (policy, network, rate, fault map) cell of a sweep."""

    policy: MitigationKind
    network_size: int = Field(gt=0)
    fault_rate: float = Field(ge=0.0, le=1.0)
    map_seed: int = Field(ge=0, lt=2**64)
    accuracy: float = Field(ge=0.0, le=1.0)
    latency: float = Field(ge=0.0)
    energy: float = Field(ge=0.0)
    area: float = Field(ge=0.0)

    def sort_key(self) -> tuple:
        return (POLICY_ORDER[self.policy], self.network_size, self.fault_rate, self.map_seed)


class CellSummary(BaseModel):
    """Mean accuracy and cost over the fault maps of one (policy, network, rate) cell."""

    policy: MitigationKind
    network_size: int
    fault_rate: float
    maps: int
    mean_accuracy: float
    std_accuracy: float
    latency: float
    energy: float
    area: float


class SweepResult(BaseModel):
    """All rows of a sweep, kept in canonical order."""

    rows: list[SweepRow]

    @model_validator(mode="after")
    def _canonical(self) -> SweepResult:
        keys = [row.sort_key() for row in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (policy, network, rate, map) rows")
        self.rows.sort(key=SweepRow.sort_key)
        return self

    def policies(self) -> list[MitigationKind]:
        return sorted({row.policy for row in self.rows}, key=POLICY_ORDER.__getitem__)

    def fault_rates(self) -> list[float]:
        return sorted({row.fault_rate for row in self.rows})

    def aggregate(self) -> list[CellSummary]:
        cells: dict[tuple, list[SweepRow]] = {}
        for row in self.rows:
            cells.setdefault((row.policy, row.network_size, row.fault_rate), []).append(row)
        summaries = []
        for (policy, network_size, rate), rows in cells.items():
            accuracies = [row.accuracy for row in rows]
            summaries.append(
                CellSummary(
                    policy=policy,
                    network_size=network_size,
                    fault_rate=rate,
                    maps=len(rows),
                    mean_accuracy=fmean(accuracies),
                    std_accuracy=pstdev(accuracies),
                    latency=fmean(row.latency for row in rows),
                    energy=fmean(row.energy for row in rows),
                    area=fmean(row.area for row in rows),
                )
            )
        return summaries

    def mean_accuracy(self, policy: MitigationKind, fault_rate: float) -> float:
        values = [r.accuracy for r in self.rows if r.policy == policy and math.isclose(r.fault_rate, fault_rate)]
        if not values:
            raise KeyError(f"no rows for {policy.value} at rate {fault_rate}")
        return fmean(values)


class AnalysisRow(BaseModel):
    """Unmitigated accuracy for one fault scenario, rate and map."""

    scenario: str
    fault_rate: float = Field(ge=0.0, le=1.0)
    map_seed: int = Field(ge=0, lt=2**64)
    accuracy: float = Field(ge=0.0, le=1.0)
    weights_increased: int = Field(ge=0)
    weights_decreased: int = Field(ge=0)
    weights_at_or_above_max: int = Field(ge=0)


class AnalysisResult(BaseModel):
    """Fault-tolerance characterisation of a clean model."""

    rows: list[AnalysisRow]
    clean_accuracy: float = Field(ge=0.0, le=1.0)
