"""Tests for the LSTM layers, the full network, optimizers and checkpoints."""

import math

import numpy as np
import pytest

from src.config import ModelConfig
from src.encoding import TokenVocab, encode_batch
from src.errors import DataError, NumericalError
from src.network.checkpoint import load_checkpoint, save_checkpoint
from src.network.lstm import LstmLayerParams, LstmState, lstm_forward, lstm_step
from src.network.model import LstmModel, forward, loss_and_grads
from src.network.optim import SGD, Adam, apply_update, clip_by_global_norm, global_norm, make_optimizer
from tests.helpers import gradient_mismatches, numerical_gradient


@pytest.fixture
def small_vocab():
    """Five-character vocabulary with sequences of length six."""
    return TokenVocab(chars=("!", "C", "E", "N", "O"), max_len=6)


@pytest.fixture
def small_batch(small_vocab):
    return encode_batch(["CCO", "CN", "OCCN"], small_vocab)


@pytest.fixture
def small_model(small_vocab):
    config = ModelConfig(lstm_units=4, dense_units=4, dropout=0.0)
    return LstmModel.initialize(small_vocab.size, config, seed=3)


class TestLstmLayer:
    """Single-layer math."""

    def test_step_matches_sequence_forward(self):
        rng = np.random.default_rng(0)
        params = LstmLayerParams(
            W=rng.normal(size=(3, 8)), U=rng.normal(size=(2, 8)), b=rng.normal(size=8)
        )
        x = rng.normal(size=(2, 5, 3))
        hs, _ = lstm_forward(params, x)
        state = LstmState.zeros(2, batch=2)
        for t in range(5):
            state, h = lstm_step(params, state, x[:, t])
            np.testing.assert_allclose(h, hs[:, t], atol=1e-12)

    def test_zero_weights_give_zero_output(self):
        params = LstmLayerParams(W=np.zeros((3, 8)), U=np.zeros((2, 8)), b=np.zeros(8))
        state, h = lstm_step(params, LstmState.zeros(2), np.ones(3))
        np.testing.assert_array_equal(h, np.zeros(2))
        np.testing.assert_array_equal(state.c, np.zeros(2))

    def test_bias_only_unit(self):
        """With zero weights the output depends on the gate biases alone (order i, f, c, o)."""
        params = LstmLayerParams(W=np.zeros((2, 4)), U=np.zeros((1, 4)), b=np.array([0.5, -1.0, 0.3, 2.0]))
        _, h = lstm_step(params, LstmState.zeros(1), np.zeros(2))

        def sigmoid(v):
            return 1.0 / (1.0 + math.exp(-v))

        expected = sigmoid(2.0) * math.tanh(sigmoid(0.5) * math.tanh(0.3))
        assert h[0] == pytest.approx(expected, rel=1e-12)

    def test_open_forget_gate_keeps_cell(self):
        """A saturated forget gate with a closed input gate carries the cell through many steps."""
        params = LstmLayerParams(W=np.zeros((2, 4)), U=np.zeros((1, 4)), b=np.array([-30.0, 30.0, 0.0, 0.0]))
        state = LstmState(h=np.zeros(1), c=np.array([0.8]))
        for _ in range(60):
            state, _ = lstm_step(params, state, np.zeros(2))
        assert abs(state.c[0] - 0.8) < 1e-6

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(ValueError):
            LstmLayerParams(W=np.zeros((3, 8)), U=np.zeros((2, 6)), b=np.zeros(8))

    def test_gate_slices(self):
        W = np.arange(3 * 8, dtype=float).reshape(3, 8)
        params = LstmLayerParams(W=W, U=np.zeros((2, 8)), b=np.zeros(8))
        np.testing.assert_array_equal(params.W_f, W[:, 2:4])
        np.testing.assert_array_equal(params.gate("o")[0], W[:, 6:8])


class TestGradients:
    """Analytic gradients against central finite differences."""

    def test_every_parameter_matches_finite_differences(self, small_model, small_batch):
        """Every entry of every parameter agrees to a relative error below 1e-4."""
        _, analytic = loss_and_grads(small_model, small_batch)
        problems = []
        for name, array in small_model.params.items():
            flat = list(np.ndindex(array.shape))
            numeric = numerical_gradient(lambda: loss_and_grads(small_model, small_batch)[0], array, flat)
            problems += [f"{name} {p}" for p in gradient_mismatches(analytic[name], numeric)]
        assert not problems, "\n".join(problems)

    def test_gradient_names_match_parameters(self, small_model, small_batch):
        _, grads = loss_and_grads(small_model, small_batch)
        assert set(grads) == set(small_model.params)
        for name, grad in grads.items():
            assert grad.shape == small_model.params[name].shape


class TestModel:
    """Full network behavior."""

    def test_probabilities_sum_to_one(self, small_model, small_batch):
        probs = forward(small_model, small_batch)
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)

    def test_stateful_step_matches_batch_forward(self, small_model, small_batch):
        """Feeding characters one at a time reproduces the batch distributions."""
        x = small_batch.as_float()
        probs, _ = small_model.forward(x)
        state = small_model.initial_state(x.shape[0])
        for t in range(x.shape[1]):
            step_probs, state = small_model.step(x[:, t], state)
            np.testing.assert_allclose(step_probs, probs[:, t], atol=1e-12)

    def test_initial_loss_near_uniform(self, small_model, small_batch, small_vocab):
        loss, _ = loss_and_grads(small_model, small_batch)
        assert abs(loss - np.log(small_vocab.size)) < 1.0

    def test_dropout_needs_rng(self, small_vocab, small_batch):
        model = LstmModel.initialize(small_vocab.size, ModelConfig(lstm_units=4, dense_units=4, dropout=0.5))
        with pytest.raises(ValueError):
            model.forward(small_batch.as_float(), training=True)

    def test_dropout_changes_training_loss_only(self, small_vocab, small_batch):
        model = LstmModel.initialize(small_vocab.size, ModelConfig(lstm_units=4, dense_units=4, dropout=0.5))
        clean, _ = model.loss_and_grads(small_batch)
        dropped, _ = model.loss_and_grads(small_batch, training=True, rng=np.random.default_rng(0))
        assert clean != dropped
        assert model.evaluate(small_batch) == pytest.approx(clean)

    def test_dropout_preserves_expected_input(self, small_vocab):
        """Inverted dropout leaves the mean mask at one, so expected pre-activations are unchanged."""
        model = LstmModel.initialize(small_vocab.size, ModelConfig(lstm_units=4, dense_units=4, dropout=0.1), seed=1)
        masks = model.dropout_masks(10000, np.random.default_rng(0))
        for name, mask in masks.items():
            assert np.all((mask == 0.0) | np.isclose(mask, 1.0 / 0.9))
            np.testing.assert_allclose(mask.mean(axis=0), 1.0, atol=0.02)
            weights = np.abs(model.params[f"{name}.W"])
            dropped = (mask @ weights).mean(axis=0)
            np.testing.assert_allclose(dropped, np.ones(mask.shape[1]) @ weights, rtol=0.02)

    def test_vocab_size_mismatch_rejected(self, small_model):
        other = TokenVocab(chars=("!", "C", "E"), max_len=6)
        with pytest.raises(ValueError):
            forward(small_model, encode_batch(["CC"], other))

    def test_wrong_parameter_shape_rejected(self, small_model):
        params = dict(small_model.params)
        params["out.b"] = np.zeros(7)
        with pytest.raises(ValueError):
            LstmModel(params, small_model.vocab_size, small_model.config)

    def test_non_finite_weights_name_the_layer(self, small_model, small_batch):
        small_model.params["dense1.W"][0, 0] = np.nan
        with pytest.raises(NumericalError) as excinfo:
            forward(small_model, small_batch)
        assert excinfo.value.layer == "dense1"

    def test_float32_model(self, small_vocab, small_batch):
        model = LstmModel.initialize(small_vocab.size, ModelConfig(lstm_units=4, dense_units=4, dtype="float32"))
        assert forward(model, small_batch).dtype == np.float32


class TestOptimizers:
    """Update rules and clipping."""

    def test_sgd_step(self):
        params = {"w": np.array([1.0, 2.0])}
        SGD(0.5).step(params, {"w": np.array([2.0, -2.0])})
        np.testing.assert_allclose(params["w"], [0.0, 3.0])

    def test_adam_first_step_moves_by_learning_rate(self):
        """With bias correction the first Adam step has magnitude lr per entry."""
        params = {"w": np.array([1.0, -1.0])}
        Adam(0.1).step(params, {"w": np.array([3.0, -0.5])})
        np.testing.assert_allclose(params["w"], [0.9, -0.9], atol=1e-6)

    def test_adam_state_round_trip(self):
        adam = Adam(0.01)
        params = {"w": np.ones(3)}
        adam.step(params, {"w": np.ones(3)})
        restored = Adam(0.01)
        restored.load_state_dict(adam.state_dict())
        assert restored.t == 1
        np.testing.assert_array_equal(restored.m["w"], adam.m["w"])

    def test_clip_by_global_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        clipped = clip_by_global_norm(grads, 1.0)
        assert global_norm(clipped) == pytest.approx(1.0)
        assert clip_by_global_norm(grads, None) is grads

    def test_apply_update_lowers_loss(self, small_model, small_batch):
        before, grads = loss_and_grads(small_model, small_batch)
        apply_update(small_model, grads, SGD(0.1))
        after, _ = loss_and_grads(small_model, small_batch)
        assert after < before

    def test_unknown_optimizer(self):
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", 0.1)


class TestCheckpoint:
    """Saving and restoring parameters, optimizer state and vocabulary."""

    def test_round_trip(self, small_model, small_vocab, small_batch, temp_output_dir):
        adam = Adam(0.004)
        _, grads = loss_and_grads(small_model, small_batch)
        adam.step(small_model.params, grads)
        path = save_checkpoint(temp_output_dir / "model.npz", small_model, small_vocab, adam, {"chunks": 3})
        model, vocab, optimizer, meta = load_checkpoint(path)
        assert vocab == small_vocab
        assert optimizer.learning_rate == pytest.approx(0.004)
        assert optimizer.t == 1
        assert meta["extra"] == {"chunks": 3}
        for name, value in small_model.params.items():
            np.testing.assert_array_equal(model.params[name], value)

    def test_no_temporary_file_left(self, small_model, small_vocab, temp_output_dir):
        save_checkpoint(temp_output_dir / "model.npz", small_model, small_vocab)
        assert [p.name for p in temp_output_dir.iterdir()] == ["model.npz"]

    def test_missing_file(self, temp_output_dir):
        with pytest.raises(DataError):
            load_checkpoint(temp_output_dir / "absent.npz")

    def test_garbage_file(self, temp_output_dir):
        path = temp_output_dir / "bad.npz"
        path.write_bytes(b"not an archive")
        with pytest.raises(DataError):
            load_checkpoint(path)
