"""Numpy implementation of the character-level LSTM network."""

from .checkpoint import load_checkpoint, save_checkpoint
from .lstm import LstmLayerParams, LstmState, lstm_step
from .model import LstmModel, forward, loss_and_grads
from .optim import SGD, Adam, Optimizer, apply_update, make_optimizer

__all__ = [
    "LstmLayerParams",
    "LstmState",
    "lstm_step",
    "LstmModel",
    "forward",
    "loss_and_grads",
    "Adam",
    "SGD",
    "Optimizer",
    "apply_update",
    "make_optimizer",
    "load_checkpoint",
    "save_checkpoint",
]
