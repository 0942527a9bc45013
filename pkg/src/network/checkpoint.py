"""Checkpoint files: parameters, optimizer moments and vocabulary in one ``.npz`` archive."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.config import ModelConfig
from src.encoding import TokenVocab
from src.errors import DataError
from src.network.model import LstmModel
from src.network.optim import Optimizer, make_optimizer

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: Path,
    model: LstmModel,
    vocab: TokenVocab,
    optimizer: Optional[Optimizer] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a checkpoint atomically.

    Args:
        path: Destination file
        model: Network to store
        vocab: Vocabulary the network was trained with
        optimizer: Optional optimizer whose moments and learning rate are stored
        extra: JSON-serializable training metadata

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": CHECKPOINT_VERSION,
        "vocab_chars": list(vocab.chars),
        "max_len": vocab.max_len,
        "vocab_hash": vocab.digest.hex(),
        "model_config": model.config.model_dump(),
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "optimizer": optimizer.name if optimizer else None,
        "learning_rate": optimizer.learning_rate if optimizer else None,
        "extra": extra or {},
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    if optimizer is not None:
        arrays.update({f"opt/{k}": v for k, v in optimizer.state_dict().items()})
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as handle:
        np.savez(handle, **arrays)
    os.replace(tmp, path)
    logger.debug("Saved checkpoint %s", path)
    return path


def load_checkpoint(path: Path) -> Tuple[LstmModel, TokenVocab, Optional[Optimizer], Dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Returns:
        (model, vocabulary, optimizer or None, metadata)

    Raises:
        DataError: If the file is missing, of another version, or internally inconsistent
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as exc:
        raise DataError(f"Cannot read checkpoint {path}: {exc}") from exc
    if "meta" not in arrays:
        raise DataError(f"{path} has no metadata")
    meta = json.loads(str(arrays["meta"]))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    vocab = TokenVocab(chars=tuple(meta["vocab_chars"]), max_len=meta["max_len"])
    if vocab.digest.hex() != meta["vocab_hash"]:
        raise DataError(f"{path}: vocabulary hash mismatch")
    params = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    try:
        model = LstmModel(params, vocab.size, ModelConfig(**meta["model_config"]))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    optimizer = None
    if meta.get("optimizer"):
        optimizer = make_optimizer(meta["optimizer"], meta["learning_rate"])
        optimizer.load_state_dict({k[len("opt/"):]: v for k, v in arrays.items() if k.startswith("opt/")})
    return model, vocab, optimizer, meta
