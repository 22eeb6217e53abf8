"""Shared test fixtures for the fault simulator tests."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest

from snn_fault_sim.config import ExperimentConfig
from snn_fault_sim.models import (
    CleanModelStats,
    EncodingParams,
    EngineConfig,
    LabeledImages,
    LifParams,
    NeuronLabelAssignment,
    QuantizedWeightMatrix,
    StdpParams,
    TrainedModel,
    TrainingConfig,
    Workload,
)

SIDE = 8
NUM_CLASSES = 4


def quadrant_images(count: int) -> LabeledImages:
    """8x8 images whose class is the lit quadrant; labels cycle 0, 1, 2, 3."""
    labels = np.arange(count) % NUM_CLASSES
    images = np.zeros((count, SIDE, SIDE), dtype=np.uint8)
    half = SIDE // 2
    for index, label in enumerate(labels):
        row, col = divmod(int(label), 2)
        images[index, row * half : (row + 1) * half, col * half : (col + 1) * half] = 255
    return LabeledImages(images=images, labels=labels.astype(np.uint8))


def write_idx_images(path: Path, images: np.ndarray) -> None:
    count, rows, cols = images.shape
    path.write_bytes(struct.pack(">IIII", 0x00000803, count, rows, cols) + images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    path.write_bytes(struct.pack(">II", 0x00000801, len(labels)) + labels.astype(np.uint8).tobytes())


@pytest.fixture
def quadrants() -> LabeledImages:
    """Forty synthetic 8x8 images of four classes."""
    return quadrant_images(40)


@pytest.fixture
def data_dir(tmp_path: Path) -> Path:
    """A data directory holding a quadrant workload laid out like MNIST."""
    folder = tmp_path / "data" / Workload.MNIST.value
    folder.mkdir(parents=True)
    train, test = quadrant_images(40), quadrant_images(12)
    write_idx_images(folder / "train-images-idx3-ubyte", train.images)
    write_idx_labels(folder / "train-labels-idx1-ubyte", train.labels)
    write_idx_images(folder / "t10k-images-idx3-ubyte", test.images)
    write_idx_labels(folder / "t10k-labels-idx1-ubyte", test.labels)
    return tmp_path / "data"


@pytest.fixture
def quadrant_model() -> TrainedModel:
    """Hand-built 64x4 model: neuron k has strong weights on quadrant k only."""
    reference = quadrant_images(NUM_CLASSES).flat_images()
    codes = np.where(reference.T > 0, 200, 10).astype(np.uint8)
    weights = QuantizedWeightMatrix(codes=codes, scale=1.0 / 255)
    return TrainedModel(
        weights=weights,
        theta=np.zeros(NUM_CLASSES),
        lif=LifParams(),
        stats=CleanModelStats.from_codes(codes),
        assignment=NeuronLabelAssignment(labels=[0, 1, 2, 3], num_classes=NUM_CLASSES),
        seed=0,
        w_limit=1.0,
    )


@pytest.fixture
def peaked_model(quadrant_model: TrainedModel) -> TrainedModel:
    """Quadrant model with strong weights at 180 and four at 250, so wgh_hp (184) < wgh_max (250)."""
    codes = np.where(quadrant_model.weights.codes == 200, 180, 10).astype(np.uint8)
    codes[[0, 1, 2, 3], 0] = 250
    return quadrant_model.model_copy(
        update={
            "weights": quadrant_model.weights.with_codes(codes),
            "stats": CleanModelStats.from_codes(codes),
        }
    )


@pytest.fixture
def engine_config() -> EngineConfig:
    """Engine configuration with the debug invariant checks switched on."""
    return EngineConfig(debug_checks=True, batch_size=8)


@pytest.fixture
def training_config() -> TrainingConfig:
    """Small training setup for the quadrant images."""
    return TrainingConfig(
        network_size=8,
        label_subset=40,
        lif=LifParams(v_threshold=5.0),
        stdp=StdpParams(weight_norm=12.0, min_spikes=1, log_every=20, debug_checks=True),
        encoding=EncodingParams(duration=30, max_rate=0.5),
    )


@pytest.fixture
def experiment_config(data_dir: Path, tmp_path: Path) -> ExperimentConfig:
    """Experiment over the quadrant workload with a small grid."""
    return ExperimentConfig(
        workload=Workload.MNIST,
        data_dir=data_dir,
        model_path=tmp_path / "models" / "quadrants.json",
        network_size=8,
        train_subset=40,
        test_subset=12,
        label_subset=40,
        fault_rates=[0.0, 0.05],
        num_fault_maps=2,
        master_seed=11,
        workers=2,
        lif=LifParams(v_threshold=5.0),
        stdp=StdpParams(weight_norm=12.0, min_spikes=1, log_every=20),
        encoding=EncodingParams(duration=30, max_rate=0.5),
        engine=EngineConfig(debug_checks=True, batch_size=8),
    )
