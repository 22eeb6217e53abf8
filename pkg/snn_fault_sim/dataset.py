"""Reader for the IDX image/label files used by MNIST and Fashion-MNIST."""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from snn_fault_sim.errors import SimulationError
from snn_fault_sim.models import LabeledImages, Workload

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Both workloads publish the same four file names.
SPLIT_FILES: dict[str, tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class DatasetFormatError(SimulationError):
    """Raised when an IDX file is malformed.

    Attributes:
        path: File being parsed.
        offset: Byte offset at which the problem was detected.
    """

    def __init__(self, path: Path, offset: int, message: str) -> None:
        super().__init__(f"{path}: {message} (at byte offset {offset})")
        self.path = path
        self.offset = offset


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DatasetFormatError(Path(path), 0, f"cannot read file: {exc.strerror or exc}") from exc


def _parse_header(path: Path, data: bytes, magic: int, ndim: int) -> tuple[int, ...]:
    header_size = 4 * (1 + ndim)
    if len(data) < header_size:
        raise DatasetFormatError(
            path, len(data), f"truncated header: expected {header_size} bytes, got {len(data)}"
        )
    (found,) = struct.unpack_from(">I", data, 0)
    if found != magic:
        raise DatasetFormatError(path, 0, f"wrong magic number 0x{found:08X}, expected 0x{magic:08X}")
    shape = struct.unpack_from(f">{ndim}I", data, 4)
    expected = header_size + int(np.prod(shape, dtype=np.int64))
    if len(data) != expected:
        raise DatasetFormatError(
            path,
            min(len(data), expected),
            f"truncated or oversized file: expected {expected} bytes, got {len(data)}",
        )
    return shape


def load_images(path: Path) -> np.ndarray:
    """Read an ``idx3-ubyte`` file into a (count x rows x cols) uint8 array."""
    path = Path(path)
    data = _read(path)
    count, rows, cols = _parse_header(path, data, IMAGES_MAGIC, ndim=3)
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def load_labels(path: Path) -> np.ndarray:
    """Read an ``idx1-ubyte`` file into a uint8 label vector."""
    path = Path(path)
    data = _read(path)
    (count,) = _parse_header(path, data, LABELS_MAGIC, ndim=1)
    return np.frombuffer(data, dtype=np.uint8, offset=8, count=count)


def load_idx(images_path: Path, labels_path: Path) -> LabeledImages:
    """Load a matching image/label file pair.

    Raises:
        DatasetFormatError: On a bad magic number, truncation, or a count
            mismatch between the two files.
    """
    images = load_images(images_path)
    labels = load_labels(labels_path)
    if len(images) != len(labels):
        raise DatasetFormatError(
            Path(labels_path), 4, f"label count {len(labels)} does not match image count {len(images)}"
        )
    logger.debug("Loaded %d images of %dx%d from %s", len(images), *images.shape[1:], images_path)
    return LabeledImages(images=images, labels=labels)


def workload_paths(data_dir: Path, workload: Workload, split: str) -> tuple[Path, Path]:
    """Image and label paths of a workload split under ``data_dir/<workload>/``."""
    if split not in SPLIT_FILES:
        raise ValueError(f"unknown split '{split}', expected one of {sorted(SPLIT_FILES)}")
    images_name, labels_name = SPLIT_FILES[split]
    folder = Path(data_dir) / workload.value
    return folder / images_name, folder / labels_name


def load_workload(data_dir: Path, workload: Workload, split: str) -> LabeledImages:
    """Load the ``train`` or ``test`` split of a workload."""
    return load_idx(*workload_paths(data_dir, workload, split))
