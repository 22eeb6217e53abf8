"""Configuration management for the fault simulator.

``Settings`` holds machine-level options (data directory, dataset mirrors,
logging). ``ExperimentConfig`` holds everything that determines the numbers of
an experiment; it is read from a JSON file in ``configs/``, patched with
``--set dotted.key=value`` overrides, and completed from ``SNNFAULT_*``
environment variables.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from snn_fault_sim.errors import ConfigError
from snn_fault_sim.models import (
    CostParams,
    EncodingParams,
    EngineConfig,
    LifParams,
    MitigationKind,
    StdpParams,
    TrainingConfig,
    Workload,
)

ENV_PREFIX = "SNNFAULT_"


class Settings(BaseSettings):
    """Machine settings loaded from environment variables or the .env file."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix=ENV_PREFIX,
        extra="ignore",
    )

    data_dir: Path = Path("data")
    mnist_mirror: str = "https://ossci-datasets.s3.amazonaws.com/mnist/"
    fashion_mnist_mirror: str = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
    download_timeout: float = 60.0
    log_level: str = "INFO"

    def mirror_url(self, workload: Workload) -> str:
        return self.mnist_mirror if workload == Workload.MNIST else self.fashion_mnist_mirror


def get_settings() -> Settings:
    """Create and return a Settings instance."""
    return Settings()


class ExperimentConfig(BaseSettings):
    """Every parameter of a train / sweep / analysis experiment."""

    # Environment variables only; the .env file holds Settings keys.
    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_nested_delimiter="__",
        extra="forbid",
    )

    workload: Workload = Workload.MNIST
    data_dir: Path = Path("data")
    model_path: Optional[Path] = None
    train_if_missing: bool = True

    network_size: int = Field(default=100, gt=0)
    train_subset: int = Field(default=5000, gt=0)
    test_subset: int = Field(default=1000, gt=0)
    label_subset: Optional[int] = Field(default=1000, gt=0)

    fault_rates: list[float] = Field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1])
    num_fault_maps: int = Field(default=10, ge=1)
    policies: list[MitigationKind] = Field(default_factory=lambda: list(MitigationKind))
    master_seed: int = Field(default=2022, ge=0, lt=2**64)
    workers: int = Field(default=4, ge=1)

    lif: LifParams = Field(default_factory=LifParams)
    stdp: StdpParams = Field(default_factory=StdpParams)
    encoding: EncodingParams = Field(default_factory=EncodingParams)
    engine: EngineConfig = Field(default_factory=EngineConfig)
    cost_params: CostParams = Field(default_factory=CostParams)

    @field_validator("fault_rates")
    @classmethod
    def _rates_in_range(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("at least one fault rate is required")
        for rate in value:
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"fault rate {rate} outside [0, 1]")
        if len(set(value)) != len(value):
            raise ValueError("fault rates must be distinct")
        return value

    @field_validator("policies")
    @classmethod
    def _distinct_policies(cls, value: list[MitigationKind]) -> list[MitigationKind]:
        if not value:
            raise ValueError("at least one policy is required")
        if len(set(value)) != len(value):
            raise ValueError("policies must be distinct")
        return value

    @model_validator(mode="after")
    def _label_subset_fits(self) -> ExperimentConfig:
        if self.label_subset is not None and self.label_subset > self.train_subset:
            raise ValueError("label_subset cannot exceed train_subset")
        return self

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            network_size=self.network_size,
            label_subset=self.label_subset,
            lif=self.lif,
            stdp=self.stdp,
            encoding=self.encoding,
        )

    def resolved_model_path(self) -> Path:
        """Explicit ``model_path`` or a name derived from workload, size and seed."""
        if self.model_path is not None:
            return self.model_path
        return Path("models") / f"{self.workload.value}_n{self.network_size}_seed{self.master_seed}.json"


def parse_override(text: str) -> tuple[list[str], Any]:
    """Split ``dotted.key=value``; the value is JSON when it parses, else a plain string."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{text}' is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def _apply_override(data: dict[str, Any], path: list[str], value: Any) -> None:
    node = data
    for part in path[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set '{'.'.join(path)}': '{part}' is not a section")
        node = child
    node[path[-1]] = value


def load_experiment_config(path: Path | None = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read an experiment file and apply overrides.

    Args:
        path: JSON experiment file; None starts from the defaults.
        overrides: ``dotted.key=value`` strings applied in order.

    Raises:
        ConfigError: If the file is unreadable or not JSON, or validation
            fails. The message names the offending key.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    for override in overrides:
        _apply_override(data, *parse_override(override))

    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "<config>"
        raise ConfigError(f"invalid config key '{key}': {error['msg']}") from exc
