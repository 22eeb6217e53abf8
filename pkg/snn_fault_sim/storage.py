"""Trained-model files: versioned JSON with weight rows stored as hex strings."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from snn_fault_sim.errors import SimulationError
from snn_fault_sim.models import (
    CleanModelStats,
    LifParams,
    NeuronLabelAssignment,
    QuantizedWeightMatrix,
    TrainedModel,
    Workload,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT = "snn-trained-model"
MODEL_VERSION = 1


class ModelFileError(SimulationError):
    """Raised when a trained-model file cannot be read or written."""


class _ModelDocument(BaseModel):
    format: Literal["snn-trained-model"]
    version: Literal[1]
    rows: int = Field(gt=0)
    cols: int = Field(gt=0)
    scale: float = Field(gt=0.0)
    w_limit: float = Field(gt=0.0)
    seed: int = Field(ge=0, lt=2**64)
    workload: Optional[Workload] = None
    lif: LifParams
    stats: CleanModelStats
    assignment: NeuronLabelAssignment
    theta: list[float]
    weight_rows: list[str]


def model_to_bytes(model: TrainedModel) -> bytes:
    document = _ModelDocument(
        format=MODEL_FORMAT,
        version=MODEL_VERSION,
        rows=model.weights.num_inputs,
        cols=model.weights.num_neurons,
        scale=model.weights.scale,
        w_limit=model.w_limit,
        seed=model.seed,
        workload=model.workload,
        lif=model.lif,
        stats=model.stats,
        assignment=model.assignment,
        theta=[float(t) for t in model.theta],
        weight_rows=[row.tobytes().hex() for row in model.weights.codes],
    )
    return document.model_dump_json(indent=2).encode("utf-8") + b"\n"


def model_from_bytes(data: bytes) -> TrainedModel:
    """Parse a model document.

    Raises:
        ModelFileError: If the document is malformed or inconsistent.
    """
    try:
        document = _ModelDocument.model_validate_json(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "<document>"
        raise ModelFileError(f"invalid model field '{field}': {error['msg']}") from exc

    if len(document.weight_rows) != document.rows:
        raise ModelFileError(f"expected {document.rows} weight rows, found {len(document.weight_rows)}")
    try:
        codes = np.stack([np.frombuffer(bytes.fromhex(row), dtype=np.uint8) for row in document.weight_rows])
    except ValueError as exc:
        raise ModelFileError(f"weight rows are not {document.cols}-byte hex strings: {exc}") from exc
    if codes.shape != (document.rows, document.cols):
        raise ModelFileError(f"weight rows decode to shape {codes.shape}, expected {(document.rows, document.cols)}")

    try:
        return TrainedModel(
            weights=QuantizedWeightMatrix(codes=codes, scale=document.scale),
            theta=np.asarray(document.theta, dtype=np.float64),
            lif=document.lif,
            stats=document.stats,
            assignment=document.assignment,
            seed=document.seed,
            w_limit=document.w_limit,
            workload=document.workload,
        )
    except ValidationError as exc:
        raise ModelFileError(f"inconsistent model file: {exc.errors()[0]['msg']}") from exc


def save_model(model: TrainedModel, path: Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(model_to_bytes(model))
    except OSError as exc:
        raise ModelFileError(f"cannot write model to {path}: {exc}") from exc
    logger.info("Saved %s model to %s", model.weights.dims, path)


def load_model(path: Path) -> TrainedModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    return model_from_bytes(data)
