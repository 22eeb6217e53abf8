"""Unsupervised readout: neuron labeling and spike-count classification."""

from __future__ import annotations

import numpy as np

from snn_fault_sim.errors import InvalidArgumentError
from snn_fault_sim.models import NO_PREDICTION, UNASSIGNED, NeuronLabelAssignment


def assign_labels(spike_counts: np.ndarray, labels: np.ndarray, num_classes: int) -> NeuronLabelAssignment:
    """Assign each neuron to the class with its highest mean response per sample.

    Args:
        spike_counts: (samples x neurons) counts from a labeling pass.
        labels: Class of each sample.
        num_classes: Number of classes in the workload.

    Returns:
        Assignment where neurons that never spiked stay unassigned.
    """
    counts = np.asarray(spike_counts, dtype=np.float64)
    labels = np.asarray(labels)
    responses = np.zeros((num_classes, counts.shape[1]))
    for cls in range(num_classes):
        members = labels == cls
        if members.any():
            responses[cls] = counts[members].mean(axis=0)
    best = np.argmax(responses, axis=0)
    assigned = np.where(responses.max(axis=0) > 0, best, UNASSIGNED)
    return NeuronLabelAssignment(labels=[int(label) for label in assigned], num_classes=num_classes)


def class_scores(spike_counts: np.ndarray, assignment: NeuronLabelAssignment) -> np.ndarray:
    """Mean spike count of each class's neurons; NaN for classes with no neurons.

    ``spike_counts`` may carry leading batch axes; the last axis is the neuron axis.
    """
    counts = np.asarray(spike_counts, dtype=np.float64)
    labels = assignment.as_array()
    if counts.shape[-1] != len(labels):
        raise InvalidArgumentError(f"got {counts.shape[-1]} spike counts for {len(labels)} neurons")
    scores = np.full(counts.shape[:-1] + (assignment.num_classes,), np.nan)
    for cls in range(assignment.num_classes):
        members = labels == cls
        if members.any():
            scores[..., cls] = counts[..., members].mean(axis=-1)
    return scores


def classify_batch(spike_counts: np.ndarray, assignment: NeuronLabelAssignment) -> np.ndarray:
    """Vectorised ``classify`` over a (samples x neurons) count matrix."""
    scores = np.nan_to_num(class_scores(spike_counts, assignment), nan=-1.0)
    best = np.argmax(scores, axis=-1)
    return np.where(scores.max(axis=-1) > 0, best, NO_PREDICTION)


def classify(spike_counts: np.ndarray, assignment: NeuronLabelAssignment) -> int:
    """Predict the class whose neurons have the highest mean spike count.

    Ties go to the lowest class index. When no assigned neuron spiked the
    result is ``NO_PREDICTION``, which always counts as a miss.
    """
    counts = np.asarray(spike_counts)
    if counts.ndim != 1:
        raise InvalidArgumentError("classify expects one spike count per neuron")
    return int(classify_batch(counts[np.newaxis, :], assignment)[0])


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of correct predictions; NO_PREDICTION never matches a label."""
    predictions = np.asarray(predictions)
    if len(predictions) == 0:
        return 0.0
    return float(np.mean(predictions == np.asarray(labels)))
