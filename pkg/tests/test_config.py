"""Tests for configuration loading."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from src.config import ModelConfig, PipelineConfig, SamplerConfig, TrainConfig, load_config, read_config_file, seed_sequence
from src.errors import DataError
from tests.helpers import write_lines


class TestDefaults:
    def test_section_defaults(self):
        config = PipelineConfig()
        assert config.model == ModelConfig()
        assert config.train.lr_init == pytest.approx(0.007)
        assert config.train.patience_chunks == 5
        assert config.train.lr_decay_factor == pytest.approx(0.5)
        assert config.sampler.temperature == 1.0
        assert config.output_dir == Path("outputs")

    def test_log_level_is_normalized(self):
        assert PipelineConfig(log_level="debug").log_level == "DEBUG"


class TestConfigFile:
    """key=value files and override precedence."""

    def test_sections_from_prefixes(self, temp_output_dir):
        path = write_lines(
            temp_output_dir / "run.env",
            ["TRAIN_BATCH_SIZE=64", "SAMPLER_TEMPERATURE=0.8", "MODEL_LSTM_UNITS=32", "SEED=3"],
        )
        config = load_config(path)
        assert config.train.batch_size == 64
        assert config.sampler.temperature == pytest.approx(0.8)
        assert config.model.lstm_units == 32
        assert config.seed == 3

    def test_overrides_win_over_file(self, temp_output_dir):
        path = write_lines(temp_output_dir / "run.env", ["TRAIN_BATCH_SIZE=64", "TRAIN_PASSES=2"])
        config = load_config(path, {"train_batch_size": 128, "train_max_chunks": None})
        assert config.train.batch_size == 128
        assert config.train.passes == 2
        assert config.train.max_chunks == TrainConfig().max_chunks

    def test_comments_and_blank_lines(self, temp_output_dir):
        path = write_lines(temp_output_dir / "run.env", ["# schedule", "", "TRAIN_LR_INIT=0.01"])
        assert read_config_file(path) == {"train": {"lr_init": "0.01"}}

    def test_missing_file(self, temp_output_dir):
        with pytest.raises(DataError):
            load_config(temp_output_dir / "absent.env")


class TestValidation:
    """Out-of-range settings are rejected."""

    @pytest.mark.parametrize(
        "overrides",
        [
            {"sampler_temperature": 0},
            {"model_dropout": 1.0},
            {"train_clip_norm": -1.0},
            {"train_optimizer": "rmsprop"},
            {"log_level": "verbose"},
            {"data_path": "/nonexistent/corpus.smi"},
        ],
    )
    def test_invalid_values(self, overrides):
        with pytest.raises(ValidationError):
            load_config(None, overrides)

    def test_sampler_length_cap(self):
        with pytest.raises(ValidationError):
            SamplerConfig(max_len=1)


class TestSeeds:
    def test_seed_sequence_is_reproducible(self):
        a = seed_sequence(7).spawn(3)
        b = seed_sequence(7).spawn(3)
        assert [s.generate_state(1)[0] for s in a] == [s.generate_state(1)[0] for s in b]
