"""Tests for ExperimentService."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from snn_fault_sim.config import ExperimentConfig
from snn_fault_sim.errors import ConfigError
from snn_fault_sim.models import (
    FaultTarget,
    InferenceResult,
    MitigationKind,
    NeuronFaultKind,
    TmrResult,
    TrainedModel,
)
from snn_fault_sim.service import ExperimentService, ExperimentServiceError, analysis_scenarios
from snn_fault_sim.storage import load_model, save_model


@pytest.fixture
def service(experiment_config: ExperimentConfig) -> ExperimentService:
    """Create a service over the quadrant workload."""
    return ExperimentService(experiment_config)


class TestDataAndModel:
    """Tests for data loading and model preparation."""

    def test_load_test_set(self, service: ExperimentService) -> None:
        """Verify the configured test subset is loaded."""
        test_set = service.load_test_set()
        assert len(test_set) == 12
        assert test_set.images.shape[1:] == (8, 8)

    def test_subset_too_large(self, experiment_config: ExperimentConfig) -> None:
        """Verify asking for more samples than exist raises ConfigError."""
        service = ExperimentService(experiment_config.model_copy(update={"test_subset": 13}))
        with pytest.raises(ConfigError, match="exceeds"):
            service.load_test_set()

    def test_missing_data(self, experiment_config: ExperimentConfig, tmp_path: Path) -> None:
        """Verify missing IDX files point at the fetch command."""
        service = ExperimentService(experiment_config.model_copy(update={"data_dir": tmp_path / "empty"}))
        with pytest.raises(ExperimentServiceError, match="faultsim fetch"):
            service.load_test_set()

    def test_prepare_trains_then_loads(self, service: ExperimentService) -> None:
        """Verify a missing model is trained and saved, and reused afterwards."""
        path = service.config.resolved_model_path()
        assert not path.exists()
        trained = service.prepare_model()
        assert path.exists()
        assert trained.network_size == 8

        loaded = service.prepare_model()
        assert np.array_equal(loaded.weights.codes, trained.weights.codes)
        assert loaded.assignment == trained.assignment

    def test_prepare_without_training(self, experiment_config: ExperimentConfig) -> None:
        """Verify a missing model is an error when training is disabled."""
        service = ExperimentService(experiment_config.model_copy(update={"train_if_missing": False}))
        with pytest.raises(ExperimentServiceError, match="does not exist"):
            service.prepare_model()

    def test_prepare_size_mismatch(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify a saved model of another network size is refused."""
        save_model(quadrant_model, service.config.resolved_model_path())
        with pytest.raises(ExperimentServiceError, match="4 neurons"):
            service.prepare_model()

    def test_encoding_deterministic(self, service: ExperimentService) -> None:
        """Verify test-sample encoding depends only on the master seed and the index."""
        test_set = service.load_test_set()
        first = service.encode(test_set)
        assert first.shape == (12, 30, 64)
        assert np.array_equal(first, service.encode(test_set))


class TestRunOne:
    """Tests for ExperimentService.run_one."""

    def test_single_policy(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify a mitigated run returns spike counts and a label."""
        test_set = service.load_test_set()
        result = service.run_one(quadrant_model, test_set, 2, MitigationKind.BNP3, 0.0, seed=1)
        assert isinstance(result, InferenceResult)
        assert result.label == 2

    def test_tmr(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify re-execution returns three votes."""
        test_set = service.load_test_set()
        result = service.run_one(quadrant_model, test_set, 1, MitigationKind.REEXECUTION_TMR, 0.0, seed=1)
        assert isinstance(result, TmrResult)
        assert result.votes == [1, 1, 1]

    def test_index_out_of_range(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify an index beyond the loaded samples raises."""
        with pytest.raises(ExperimentServiceError, match="outside"):
            service.run_one(quadrant_model, service.load_test_set(), 12, MitigationKind.BNP1, 0.0, seed=1)


class TestRunSweep:
    """Tests for ExperimentService.run_sweep."""

    @pytest.mark.asyncio
    async def test_every_cell_present(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify one row per (policy, rate, map)."""
        result = await service.run_sweep(model=quadrant_model)
        assert len(result.rows) == 5 * 2 * 2
        assert result.policies() == list(MitigationKind)
        assert result.fault_rates() == [0.0, 0.05]

    @pytest.mark.asyncio
    async def test_deterministic(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify two sweeps with the same seed agree row for row."""
        first = await service.run_sweep(model=quadrant_model)
        second = await service.run_sweep(model=quadrant_model)
        assert first == second

    @pytest.mark.asyncio
    async def test_rate_zero_rows(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify fault-free cells classify the quadrants perfectly under every policy but BnP1."""
        result = await service.run_sweep(model=quadrant_model)
        exact = [MitigationKind.NO_MITIGATION, MitigationKind.BNP2, MitigationKind.BNP3, MitigationKind.REEXECUTION_TMR]
        for kind in exact:
            assert result.mean_accuracy(kind, 0.0) == 1.0

    @pytest.mark.asyncio
    async def test_maps_shared_across_policies(
        self, service: ExperimentService, quadrant_model: TrainedModel
    ) -> None:
        """Verify every policy sees the same map seeds."""
        result = await service.run_sweep(model=quadrant_model)
        seeds = {kind: [row.map_seed for row in result.rows if row.policy == kind] for kind in result.policies()}
        assert len({tuple(value) for value in seeds.values()}) == 1

    @pytest.mark.asyncio
    async def test_cost_columns(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify re-execution costs three times the unmitigated latency."""
        result = await service.run_sweep(model=quadrant_model)
        latency = {row.policy: row.latency for row in result.rows}
        assert latency[MitigationKind.REEXECUTION_TMR] == pytest.approx(3 * latency[MitigationKind.NO_MITIGATION])

    @pytest.mark.asyncio
    async def test_trains_when_no_model(self, experiment_config: ExperimentConfig) -> None:
        """Verify the sweep prepares the model itself when none is given."""
        config = experiment_config.model_copy(update={"policies": [MitigationKind.BNP3], "num_fault_maps": 1})
        result = await ExperimentService(config).run_sweep()
        assert len(result.rows) == 2
        assert load_model(config.resolved_model_path()).network_size == 8


class TestRunAnalysis:
    """Tests for the fault-tolerance analysis."""

    def test_scenarios(self) -> None:
        """Verify the scenario table covers each neuron fault kind on its own."""
        scenarios = analysis_scenarios()
        assert len(scenarios) == 7
        assert scenarios["synapses"] == (FaultTarget.SYNAPSES, None)
        assert scenarios["neurons:vmem_reset"] == (FaultTarget.NEURONS, [NeuronFaultKind.VMEM_RESET])

    @pytest.mark.asyncio
    async def test_rows(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify one row per (scenario, rate, map) and clean accuracy at rate 0."""
        result = await service.run_analysis(model=quadrant_model)
        assert len(result.rows) == 7 * 2 * 2
        assert result.clean_accuracy == 1.0
        for row in result.rows:
            if row.fault_rate == 0.0:
                assert row.accuracy == result.clean_accuracy
                assert row.weights_increased == row.weights_decreased == 0

    def test_histogram_map(self, service: ExperimentService, quadrant_model: TrainedModel) -> None:
        """Verify the histogram map is synapse-only at the highest rate."""
        fault_map = service.histogram_map(quadrant_model)
        assert fault_map.fault_rate == 0.05
        assert fault_map.neuron_faults == {}
