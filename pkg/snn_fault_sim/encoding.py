"""Poisson rate coding of images into input spike trains."""

from __future__ import annotations

import numpy as np

from snn_fault_sim.errors import InvalidArgumentError
from snn_fault_sim.models import MAX_CODE
from snn_fault_sim.rng import substream


def firing_probabilities(image: np.ndarray, max_rate: float) -> np.ndarray:
    """Per-timestep spike probability of each pixel."""
    return np.asarray(image, dtype=np.float64).ravel() / MAX_CODE * max_rate


def encode_poisson(image: np.ndarray, duration: int, max_rate: float, seed: int) -> np.ndarray:
    """Encode an image as a (duration x pixels) boolean spike train.

    Pixel ``p`` fires independently each timestep with probability
    ``p / 255 * max_rate``.

    Raises:
        InvalidArgumentError: On an empty image, a non-positive duration or a
            rate outside (0, 1].
    """
    pixels = np.asarray(image)
    if pixels.size == 0:
        raise InvalidArgumentError("cannot encode an empty image")
    if duration < 1:
        raise InvalidArgumentError(f"duration must be at least 1 timestep, got {duration}")
    if not 0.0 < max_rate <= 1.0:
        raise InvalidArgumentError(f"max_rate must be in (0, 1], got {max_rate}")
    if pixels.min() < 0 or pixels.max() > MAX_CODE:
        raise InvalidArgumentError("pixel intensities must lie in [0, 255]")

    probabilities = firing_probabilities(pixels, max_rate)
    rng = substream(seed)
    return rng.random((duration, probabilities.size)) < probabilities
