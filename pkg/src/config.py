"""Pipeline configuration: defaults, key=value config files and command-line overrides."""

import logging
from pathlib import Path
from typing import Any, Dict, Literal, Optional

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, Field, field_validator, model_validator

from src.errors import DataError

logger = logging.getLogger(__name__)


class ModelConfig(BaseModel):
    """Network hyperparameters."""

    lstm_units: int = Field(default=256, gt=0, description="Units per LSTM layer")
    dense_units: int = Field(default=128, gt=0, description="Units per dense layer")
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0, description="Dropout rate on LSTM inputs")
    dtype: Literal["float64", "float32"] = Field(default="float64", description="Parameter precision")


class TrainConfig(BaseModel):
    """Chunked training schedule."""

    chunk_size: int = Field(default=100_000, gt=0, description="Sequences per chunk")
    batch_size: int = Field(default=512, gt=0, description="Mini-batch size")
    lr_init: float = Field(default=0.007, gt=0, description="Initial learning rate")
    patience_chunks: int = Field(default=5, gt=0, description="Chunks without improvement before decay")
    lr_decay_factor: float = Field(default=0.5, gt=0, lt=1, description="Multiplier applied on plateau")
    max_chunks: int = Field(default=1000, gt=0, description="Upper bound on trained chunks")
    passes: int = Field(default=1, gt=0, description="Passes over the training chunks")
    min_lr: float = Field(default=1e-6, gt=0, description="Stop once the learning rate falls below this")
    improvement_threshold: float = Field(default=1e-4, ge=0, description="Absolute validation gain that counts")
    clip_norm: Optional[float] = Field(default=5.0, description="Global gradient norm cap, None disables")
    optimizer: Literal["adam", "sgd"] = Field(default="adam", description="Update rule")
    seed: int = Field(default=0, ge=0, description="Seed for shuffling and dropout")

    @field_validator("clip_norm")
    @classmethod
    def _check_clip(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value <= 0:
            raise ValueError("clip_norm must be positive")
        return value


class SamplerConfig(BaseModel):
    """Generation settings."""

    temperature: float = Field(default=1.0, gt=0, description="Sampling temperature")
    max_len: Optional[int] = Field(default=None, gt=1, description="Length cap, defaults to the vocabulary's")
    seed: int = Field(default=0, ge=0, description="Sampling seed")
    count: int = Field(default=1000, ge=1, description="Molecules to generate")


class PipelineConfig(BaseModel):
    """Everything the CLI needs, merged from defaults, a config file and flags."""

    data_path: Optional[Path] = Field(default=None, description="Raw SMILES corpus")
    output_dir: Path = Field(default=Path("outputs"), description="Directory for generated artifacts")
    fragment_table: Optional[Path] = Field(default=None, description="SA fragment table")
    seed: int = Field(default=0, ge=0, description="Root seed for every random stream")
    log_level: str = Field(default="INFO", description="Root logger level")
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)

    @field_validator("log_level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level {value}")
        return value

    @model_validator(mode="after")
    def _check_paths(self) -> "PipelineConfig":
        for name in ("data_path", "fragment_table"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{name} {path} does not exist")
        return self


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "sampler": SamplerConfig}


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Turn ``train_batch_size``-style keys into nested section dictionaries."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None or value == "":
            continue
        key = key.lower()
        section, _, field = key.partition("_")
        if section in _SECTIONS and field in _SECTIONS[section].model_fields:
            nested.setdefault(section, {})[field] = value
        else:
            nested[key] = value
    return nested


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a flat key=value config file.

    Args:
        path: Config file path

    Returns:
        Nested dictionary ready for PipelineConfig

    Raises:
        DataError: If the file does not exist
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Config file not found: {path}")
    return _nest(dict(dotenv_values(path)))


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Merge defaults, an optional config file and command-line overrides, in that order.

    Args:
        path: Optional key=value config file
        overrides: Flat ``section_field`` values from the command line; None entries are ignored

    Returns:
        Validated PipelineConfig
    """
    merged: Dict[str, Any] = read_config_file(path) if path else {}
    for key, value in _nest(overrides or {}).items():
        if isinstance(value, dict):
            merged.setdefault(key, {}).update(value)
        else:
            merged[key] = value
    return PipelineConfig.model_validate(merged)


def seed_sequence(seed: int) -> np.random.SeedSequence:
    """Root of every random stream; the seed is logged so runs can be repeated."""
    logger.info("Random seed: %d", seed)
    return np.random.SeedSequence(seed)
