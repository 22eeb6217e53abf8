"""Parametric latency, energy and area model of the compute engine.

The absolute constants describe a nominal engine; what the model preserves is
the relative cost of each mitigation policy against the unmitigated engine.
Networks larger than the crossbar are time-multiplexed over
``ceil(inputs / rows) * ceil(neurons / cols)`` tiles.
"""

from __future__ import annotations

import math

from snn_fault_sim.errors import InvalidArgumentError
from snn_fault_sim.models import (
    BNP_KINDS,
    CostParams,
    CostReport,
    CrossbarDims,
    EngineConfig,
    MitigationKind,
)


def count_tiles(dims: CrossbarDims, engine: EngineConfig) -> int:
    """Number of crossbar-sized tiles needed to map a weight matrix."""
    return math.ceil(dims.rows / engine.crossbar_rows) * math.ceil(dims.cols / engine.crossbar_cols)


def policy_area(policy: MitigationKind, params: CostParams) -> float:
    """Normalised engine area; re-execution reuses the unmodified engine."""
    if policy == MitigationKind.BNP1:
        return params.area_base * params.area_bnp1
    if policy in (MitigationKind.BNP2, MitigationKind.BNP3):
        return params.area_base * params.area_bnp23
    return params.area_base


def estimate_cost(
    policy: MitigationKind,
    dims: CrossbarDims,
    duration: int,
    params: CostParams,
    engine: EngineConfig | None = None,
) -> CostReport:
    """Cost of one inference of ``duration`` timesteps under ``policy``.

    ``cycles`` counts a single pass of the unmodified engine; the policy
    factors apply to latency and energy only.

    Raises:
        InvalidArgumentError: If the duration is not positive.
    """
    if duration < 1:
        raise InvalidArgumentError(f"duration must be positive, got {duration}")
    engine = engine or EngineConfig()

    tiles = count_tiles(dims, engine)
    cycles = duration * tiles * params.base_cycles_per_timestep
    base_latency = cycles * params.cycle_time
    base_energy = params.base_power * base_latency

    if policy in BNP_KINDS:
        latency_factor, energy_factor = params.bnp_latency_factor, params.bnp_energy_factor
    elif policy == MitigationKind.REEXECUTION_TMR:
        latency_factor = energy_factor = params.tmr_factor
    else:
        latency_factor = energy_factor = 1.0

    return CostReport(
        latency=base_latency * latency_factor,
        energy=base_energy * energy_factor,
        area=policy_area(policy, params),
        cycles=cycles,
        tiles=tiles,
    )
