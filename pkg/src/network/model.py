"""Character-level generative network: two LSTM layers, two ReLU dense layers, softmax output."""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config import ModelConfig
from src.encoding import OneHotBatch
from src.errors import NumericalError
from src.network.lstm import LstmLayerParams, LstmState, check_finite, lstm_backward, lstm_forward, lstm_step

logger = logging.getLogger(__name__)

LSTM_LAYERS = ("lstm1", "lstm2")
DENSE_LAYERS = ("dense1", "dense2")
PROBABILITY_FLOOR = 1e-300


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def orthogonal(rng: np.random.Generator, size: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood of one-hot ``targets`` under ``probs``."""
    picked = (probs * targets).sum(axis=-1)
    return float(-np.log(np.maximum(picked, PROBABILITY_FLOOR)).mean())


class LstmModel:
    """
    Parameters and math of the generative network.

    Parameters live in a flat dict keyed ``<layer>.<name>`` (``lstm1.W``, ``dense2.b``,
    ``out.W``...) so optimizers and checkpoints can treat them uniformly.
    """

    def __init__(self, params: Dict[str, np.ndarray], vocab_size: int, config: Optional[ModelConfig] = None):
        self.config = config or ModelConfig()
        self.vocab_size = vocab_size
        self.params = params
        self._check_shapes()

    @classmethod
    def initialize(cls, vocab_size: int, config: Optional[ModelConfig] = None, seed: int = 0) -> "LstmModel":
        """
        Fresh parameters: Glorot-uniform input and dense matrices, orthogonal recurrent
        matrices, forget-gate bias 1 and zero elsewhere.
        """
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        dtype = np.dtype(config.dtype)
        units, dense = config.lstm_units, config.dense_units
        params: Dict[str, np.ndarray] = {}
        for name, input_dim in zip(LSTM_LAYERS, (vocab_size, units)):
            params[f"{name}.W"] = np.concatenate([glorot_uniform(rng, input_dim, units) for _ in range(4)], axis=1)
            params[f"{name}.U"] = np.concatenate([orthogonal(rng, units) for _ in range(4)], axis=1)
            bias = np.zeros(4 * units)
            bias[units : 2 * units] = 1.0
            params[f"{name}.b"] = bias
        for name, input_dim in zip(DENSE_LAYERS, (units, dense)):
            params[f"{name}.W"] = glorot_uniform(rng, input_dim, dense)
            params[f"{name}.b"] = np.zeros(dense)
        params["out.W"] = glorot_uniform(rng, dense, vocab_size)
        params["out.b"] = np.zeros(vocab_size)
        return cls({k: v.astype(dtype) for k, v in params.items()}, vocab_size, config)

    def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
        units, dense, vocab = self.config.lstm_units, self.config.dense_units, self.vocab_size
        return {
            "lstm1.W": (vocab, 4 * units),
            "lstm1.U": (units, 4 * units),
            "lstm1.b": (4 * units,),
            "lstm2.W": (units, 4 * units),
            "lstm2.U": (units, 4 * units),
            "lstm2.b": (4 * units,),
            "dense1.W": (units, dense),
            "dense1.b": (dense,),
            "dense2.W": (dense, dense),
            "dense2.b": (dense,),
            "out.W": (dense, vocab),
            "out.b": (vocab,),
        }

    def _check_shapes(self) -> None:
        expected = self.expected_shapes()
        if set(expected) != set(self.params):
            raise ValueError(f"Parameter names {sorted(self.params)} do not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name} has shape {self.params[name].shape}, expected {shape}")

    @property
    def dtype(self) -> np.dtype:
        return self.params["out.W"].dtype

    def lstm(self, name: str) -> LstmLayerParams:
        return LstmLayerParams(W=self.params[f"{name}.W"], U=self.params[f"{name}.U"], b=self.params[f"{name}.b"])

    def copy(self) -> "LstmModel":
        return LstmModel({k: v.copy() for k, v in self.params.items()}, self.vocab_size, self.config)

    def dropout_masks(self, batch: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        """Inverted-dropout masks on each LSTM input, one per sequence, shared across time."""
        rate = self.config.dropout
        masks = {}
        for name in LSTM_LAYERS:
            width = self.params[f"{name}.W"].shape[0]
            keep = rng.random((batch, width)) >= rate
            masks[name] = keep.astype(self.dtype) / (1.0 - rate)
        return masks

    def forward(
        self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None
    ) -> Tuple[np.ndarray, Dict]:
        """
        Probability vectors for every position of a (batch, time, vocab) input.

        Args:
            x: One-hot inputs as floats
            training: Apply input dropout to both LSTM layers
            rng: Source of dropout masks, required when training with dropout

        Returns:
            (probabilities of shape (batch, time, vocab), cache for ``backward``)

        Raises:
            NumericalError: With the name of the first layer producing NaN or Inf
        """
        x = x.astype(self.dtype, copy=False)
        masks = None
        if training and self.config.dropout > 0:
            if rng is None:
                raise ValueError("training with dropout needs a random generator")
            masks = self.dropout_masks(x.shape[0], rng)
        cache: Dict = {"masks": masks}
        layer_input = x
        for name in LSTM_LAYERS:
            if masks is not None:
                layer_input = layer_input * masks[name][:, None, :]
            layer_input, cache[name] = lstm_forward(self.lstm(name), layer_input, name)
        for name in DENSE_LAYERS:
            pre = layer_input @ self.params[f"{name}.W"] + self.params[f"{name}.b"]
            cache[name] = (layer_input, pre)
            layer_input = check_finite(np.maximum(pre, 0.0), name)
        logits = layer_input @ self.params["out.W"] + self.params["out.b"]
        cache["out"] = layer_input
        probs = check_finite(softmax(logits), "out")
        return probs, cache

    def backward(self, cache: Dict, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        """Parameter gradients given the gradient with respect to the output logits."""
        grads: Dict[str, np.ndarray] = {}
        top = cache["out"]
        grads["out.W"] = top.reshape(-1, top.shape[-1]).T @ dlogits.reshape(-1, dlogits.shape[-1])
        grads["out.b"] = dlogits.sum(axis=(0, 1))
        delta = dlogits @ self.params["out.W"].T
        for name in reversed(DENSE_LAYERS):
            layer_input, pre = cache[name]
            delta = delta * (pre > 0)
            grads[f"{name}.W"] = layer_input.reshape(-1, layer_input.shape[-1]).T @ delta.reshape(-1, delta.shape[-1])
            grads[f"{name}.b"] = delta.sum(axis=(0, 1))
            delta = delta @ self.params[f"{name}.W"].T
        masks = cache["masks"]
        for name in reversed(LSTM_LAYERS):
            delta, layer_grads = lstm_backward(self.lstm(name), cache[name], delta)
            for key, value in layer_grads.items():
                grads[f"{name}.{key}"] = value
            if masks is not None:
                delta = delta * masks[name][:, None, :]
        for name, grad in grads.items():
            check_finite(grad, name.split(".")[0])
        return grads

    def loss_and_grads(
        self, batch: OneHotBatch, training: bool = False, rng: Optional[np.random.Generator] = None
    ) -> Tuple[float, Dict[str, np.ndarray]]:
        """
        Next-character cross-entropy and its gradients.

        Inputs are positions 0..T-2 and targets positions 1..T-1; the loss is averaged over
        all batch * (T - 1) predictions, padding included.

        Raises:
            ValueError: If the sequences are shorter than two positions
            NumericalError: On a non-finite loss or gradient
        """
        data = batch.as_float(self.dtype)
        if data.shape[1] < 2:
            raise ValueError("sequences need at least two positions")
        if data.shape[2] != self.vocab_size:
            raise ValueError(f"batch vocabulary size {data.shape[2]} does not match the model's {self.vocab_size}")
        inputs, targets = data[:, :-1], data[:, 1:]
        probs, cache = self.forward(inputs, training=training, rng=rng)
        loss = cross_entropy(probs, targets)
        if not np.isfinite(loss):
            raise NumericalError("Non-finite loss", layer="loss")
        count = targets.shape[0] * targets.shape[1]
        grads = self.backward(cache, (probs - targets) / count)
        return loss, grads

    def evaluate(self, batch: OneHotBatch, batch_size: int = 512) -> float:
        """Mean loss without dropout, accumulated over mini-batches."""
        total = 0.0
        count = 0
        for start in range(0, len(batch), batch_size):
            part = batch.data[start : start + batch_size].astype(self.dtype)
            probs, _ = self.forward(part[:, :-1], training=False)
            n = part.shape[0] * (part.shape[1] - 1)
            total += cross_entropy(probs, part[:, 1:]) * n
            count += n
        if count == 0:
            raise ValueError("cannot evaluate an empty batch")
        return total / count

    def initial_state(self, batch: Optional[int] = None) -> List[LstmState]:
        return [LstmState.zeros(self.config.lstm_units, batch, self.dtype) for _ in LSTM_LAYERS]

    def step(self, x: np.ndarray, state: List[LstmState]) -> Tuple[np.ndarray, List[LstmState]]:
        """
        Stateful single-step inference without dropout.

        Args:
            x: One-hot input of shape (vocab,) or (batch, vocab)
            state: Per-layer state from ``initial_state`` or a previous step

        Returns:
            (next-character probabilities, new state)
        """
        layer_input = x.astype(self.dtype, copy=False)
        new_state = []
        for name, layer_state in zip(LSTM_LAYERS, state):
            updated, layer_input = lstm_step(self.lstm(name), layer_state, layer_input, name)
            new_state.append(updated)
        for name in DENSE_LAYERS:
            layer_input = np.maximum(layer_input @ self.params[f"{name}.W"] + self.params[f"{name}.b"], 0.0)
        probs = softmax(layer_input @ self.params["out.W"] + self.params["out.b"])
        return check_finite(probs, "out"), new_state


def forward(model: LstmModel, batch: OneHotBatch, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Per-position probability vectors of a one-hot batch."""
    if batch.shape[2] != model.vocab_size:
        raise ValueError(f"batch vocabulary size {batch.shape[2]} does not match the model's {model.vocab_size}")
    probs, _ = model.forward(batch.as_float(model.dtype), training=training, rng=rng)
    return probs


def loss_and_grads(model: LstmModel, batch: OneHotBatch) -> Tuple[float, Dict[str, np.ndarray]]:
    """Deterministic loss and gradients (dropout off)."""
    return model.loss_and_grads(batch, training=False)
