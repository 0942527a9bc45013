"""LSTM layer math: single steps, full-sequence forward passes and backpropagation through time.

Gate blocks are stacked along the last axis in the order input, forget, cell
candidate, output, so one matrix product computes all four pre-activations.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.errors import NumericalError

GATES = ("i", "f", "c", "o")


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    z = np.exp(x[~positive])
    out[~positive] = z / (1.0 + z)
    return out


def check_finite(array: np.ndarray, layer: str) -> np.ndarray:
    """Raise NumericalError naming ``layer`` when ``array`` holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"Non-finite values in {layer}", layer=layer)
    return array


@dataclass
class LstmLayerParams:
    """Views on the stacked weights of one LSTM layer."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        units = self.U.shape[0]
        if self.U.shape != (units, 4 * units) or self.W.shape[1] != 4 * units or self.b.shape != (4 * units,):
            raise ValueError(
                f"Inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )

    @property
    def units(self) -> int:
        return self.U.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    def gate(self, name: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W, U, b) slices of one gate: ``i``, ``f``, ``c`` or ``o``."""
        k = GATES.index(name)
        block = slice(k * self.units, (k + 1) * self.units)
        return self.W[:, block], self.U[:, block], self.b[block]

    @property
    def W_i(self) -> np.ndarray:
        return self.gate("i")[0]

    @property
    def W_f(self) -> np.ndarray:
        return self.gate("f")[0]

    @property
    def W_c(self) -> np.ndarray:
        return self.gate("c")[0]

    @property
    def W_o(self) -> np.ndarray:
        return self.gate("o")[0]

    @property
    def U_i(self) -> np.ndarray:
        return self.gate("i")[1]

    @property
    def U_f(self) -> np.ndarray:
        return self.gate("f")[1]

    @property
    def U_c(self) -> np.ndarray:
        return self.gate("c")[1]

    @property
    def U_o(self) -> np.ndarray:
        return self.gate("o")[1]

    @property
    def b_i(self) -> np.ndarray:
        return self.gate("i")[2]

    @property
    def b_f(self) -> np.ndarray:
        return self.gate("f")[2]

    @property
    def b_c(self) -> np.ndarray:
        return self.gate("c")[2]

    @property
    def b_o(self) -> np.ndarray:
        return self.gate("o")[2]


@dataclass
class LstmState:
    """Hidden and cell vectors, shape (batch, units) or (units,)."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, units: int, batch: Optional[int] = None, dtype=np.float64) -> "LstmState":
        shape = (units,) if batch is None else (batch, units)
        return cls(h=np.zeros(shape, dtype=dtype), c=np.zeros(shape, dtype=dtype))


def _gates(z: np.ndarray, units: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    i = sigmoid(z[..., :units])
    f = sigmoid(z[..., units : 2 * units])
    g = np.tanh(z[..., 2 * units : 3 * units])
    o = sigmoid(z[..., 3 * units :])
    return i, f, g, o


def lstm_step(params: LstmLayerParams, state: LstmState, x: np.ndarray, name: str = "lstm") -> Tuple[LstmState, np.ndarray]:
    """
    Advance one LSTM layer by one time step.

    Args:
        params: Layer weights
        state: Previous hidden and cell state
        x: Input of shape (input_dim,) or (batch, input_dim)
        name: Layer name used in error messages

    Returns:
        (new state, hidden output)

    Raises:
        ValueError: On a shape mismatch
        NumericalError: When the state becomes non-finite
    """
    if x.shape[-1] != params.input_dim or state.h.shape[-1] != params.units:
        raise ValueError(f"{name}: input {x.shape} or state {state.h.shape} does not fit the layer")
    z = x @ params.W + state.h @ params.U + params.b
    i, f, g, o = _gates(z, params.units)
    c = f * state.c + i * g
    h = o * np.tanh(c)
    check_finite(c, name)
    return LstmState(h=h, c=c), h


def lstm_forward(params: LstmLayerParams, x: np.ndarray, name: str = "lstm") -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Run a layer over a batch of sequences from a zero state.

    Args:
        params: Layer weights
        x: Inputs of shape (batch, time, input_dim)
        name: Layer name used in error messages

    Returns:
        (hidden outputs of shape (batch, time, units), cache for ``lstm_backward``)
    """
    batch, steps, _ = x.shape
    units = params.units
    xw = x @ params.W + params.b
    hs = np.zeros((batch, steps + 1, units), dtype=x.dtype)
    cs = np.zeros((batch, steps + 1, units), dtype=x.dtype)
    gates = np.zeros((batch, steps, 4 * units), dtype=x.dtype)
    for t in range(steps):
        z = xw[:, t] + hs[:, t] @ params.U
        i, f, g, o = _gates(z, units)
        cs[:, t + 1] = f * cs[:, t] + i * g
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t] = np.concatenate([i, f, g, o], axis=-1)
    check_finite(hs, name)
    return hs[:, 1:], {"x": x, "h": hs, "c": cs, "gates": gates}


def lstm_backward(
    params: LstmLayerParams, cache: Dict[str, np.ndarray], dh_out: np.ndarray
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Backpropagate through time.

    Args:
        params: Layer weights used in the forward pass
        cache: Cache returned by ``lstm_forward``
        dh_out: Gradient of the loss with respect to every hidden output

    Returns:
        (gradient with respect to the inputs, {"W", "U", "b"} gradients)
    """
    x, hs, cs, gates = cache["x"], cache["h"], cache["c"], cache["gates"]
    units = params.units
    steps = x.shape[1]
    dz_all = np.zeros_like(gates)
    dh_next = np.zeros_like(hs[:, 0])
    dc_next = np.zeros_like(cs[:, 0])
    for t in reversed(range(steps)):
        i = gates[:, t, :units]
        f = gates[:, t, units : 2 * units]
        g = gates[:, t, 2 * units : 3 * units]
        o = gates[:, t, 3 * units :]
        tanh_c = np.tanh(cs[:, t + 1])
        dh = dh_out[:, t] + dh_next
        dc = dh * o * (1.0 - tanh_c**2) + dc_next
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * cs[:, t] * f * (1.0 - f),
                dc * i * (1.0 - g**2),
                dh * tanh_c * o * (1.0 - o),
            ],
            axis=-1,
        )
        dz_all[:, t] = dz
        dh_next = dz @ params.U.T
        dc_next = dc * f
    flat_dz = dz_all.reshape(-1, 4 * units)
    grads = {
        "W": x.reshape(-1, x.shape[-1]).T @ flat_dz,
        "U": hs[:, :-1].reshape(-1, units).T @ flat_dz,
        "b": flat_dz.sum(axis=0),
    }
    return dz_all @ params.W.T, grads
