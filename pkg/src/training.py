"""Chunked training loop with plateau learning-rate decay, checkpoints and a metrics log."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config import TrainConfig
from src.encoding import OneHotBatch, TokenVocab, chunk_paths, read_chunk
from src.errors import DataError, NumericalError, TrainingAborted
from src.models.records import TrainHistory, TrainRecord
from src.network.checkpoint import save_checkpoint
from src.network.model import LstmModel
from src.network.optim import Optimizer, clip_by_global_norm, make_optimizer

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["chunk", "train_loss", "val_loss", "lr", "seconds", "source_chunk"]


class ChunkStream:
    """A validation chunk plus the training chunks, re-iterable once per pass."""

    def validation(self) -> OneHotBatch:
        raise NotImplementedError

    def training(self) -> Iterator[Tuple[int, OneHotBatch]]:
        raise NotImplementedError


class DirectoryStream(ChunkStream):
    """Chunk files of a prepared data directory; chunk 0 is the validation set."""

    def __init__(self, data_dir: Path, vocab: TokenVocab):
        self.vocab = vocab
        self.paths = chunk_paths(data_dir)
        header, batch = read_chunk(self.paths[0], vocab)
        if not header.validation:
            raise DataError(f"{self.paths[0]} is not flagged as the validation chunk")
        self._validation = batch
        if len(self.paths) < 2:
            raise DataError(f"{data_dir} holds no training chunks")

    def validation(self) -> OneHotBatch:
        return self._validation

    def training(self) -> Iterator[Tuple[int, OneHotBatch]]:
        for path in self.paths[1:]:
            header, batch = read_chunk(path, self.vocab)
            if header.validation:
                raise DataError(f"{path} is a validation chunk inside the training stream")
            yield header.index, batch


class InMemoryStream(ChunkStream):
    """Stream over already loaded batches; index 0 is the validation batch."""

    def __init__(self, validation: OneHotBatch, chunks: Sequence[OneHotBatch]):
        if not chunks:
            raise DataError("training stream is empty")
        self._validation = validation
        self.chunks = list(chunks)

    def validation(self) -> OneHotBatch:
        return self._validation

    def training(self) -> Iterator[Tuple[int, OneHotBatch]]:
        for index, batch in enumerate(self.chunks, start=1):
            yield index, batch


def _prefetch(items: Iterator) -> Iterator:
    """Load the next item on a background thread while the current one is consumed."""
    with ThreadPoolExecutor(max_workers=1) as pool:
        future = pool.submit(next, items, None)
        while True:
            item = future.result()
            if item is None:
                return
            future = pool.submit(next, items, None)
            yield item


def evaluate(model: LstmModel, batch: OneHotBatch, batch_size: int = 512) -> float:
    """
    Mean validation loss with dropout off.

    Raises:
        DataError: If the batch was encoded with a different vocabulary size
    """
    if batch.shape[2] != model.vocab_size:
        raise DataError(f"validation vocabulary size {batch.shape[2]} does not match the model's {model.vocab_size}")
    return model.evaluate(batch, batch_size)


def write_history(history: TrainHistory, path: Path) -> None:
    frame = pd.DataFrame(history.to_rows(), columns=HISTORY_COLUMNS)
    frame.to_csv(path, index=False)


class Trainer:
    """
    Trains a model one chunk at a time.

    After every chunk the validation loss is measured; the learning rate is multiplied
    by ``lr_decay_factor`` once ``patience_chunks`` consecutive chunks brought no
    improvement of at least ``improvement_threshold``.
    """

    def __init__(
        self,
        model: LstmModel,
        vocab: TokenVocab,
        config: Optional[TrainConfig] = None,
        checkpoint_dir: Optional[Path] = None,
        optimizer: Optional[Optimizer] = None,
        progress: bool = False,
    ):
        self.model = model
        self.vocab = vocab
        self.config = config or TrainConfig()
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.optimizer = optimizer or make_optimizer(self.config.optimizer, self.config.lr_init)
        self.progress = progress
        self.history = TrainHistory()
        self.last_good_checkpoint: Optional[Path] = None
        shuffle_seed, dropout_seed = np.random.SeedSequence(self.config.seed).spawn(2)
        self.shuffle_rng = np.random.default_rng(shuffle_seed)
        self.dropout_rng = np.random.default_rng(dropout_seed)

    def _train_chunk(self, batch: OneHotBatch, chunk: int) -> float:
        order = self.shuffle_rng.permutation(len(batch))
        size = self.config.batch_size
        total = 0.0
        for start in tqdm(
            range(0, len(order), size), desc=f"chunk {chunk}", leave=False, disable=not self.progress
        ):
            rows = order[start : start + size]
            loss, grads = self.model.loss_and_grads(batch.take(rows), training=True, rng=self.dropout_rng)
            grads = clip_by_global_norm(grads, self.config.clip_norm)
            self.optimizer.step(self.model.params, grads)
            total += loss * len(rows)
        return total / len(order)

    def _save(self, name: str) -> Optional[Path]:
        if self.checkpoint_dir is None:
            return None
        return save_checkpoint(
            self.checkpoint_dir / name,
            self.model,
            self.vocab,
            self.optimizer,
            extra={"best_val_loss": self.history.best_val_loss, "chunks": len(self.history.records)},
        )

    def _abort(self, exc: NumericalError) -> TrainingAborted:
        where = str(self.last_good_checkpoint) if self.last_good_checkpoint else None
        logger.error("Training aborted: %s (last good checkpoint: %s)", exc, where)
        return TrainingAborted(f"Training aborted: {exc}", checkpoint=where, layer=exc.layer)

    def fit(self, stream: ChunkStream) -> TrainHistory:
        """
        Train over the stream for ``passes`` passes or until a stop condition.

        Raises:
            TrainingAborted: On a non-finite loss; earlier checkpoints are left intact
        """
        config = self.config
        validation = stream.validation()
        try:
            best = evaluate(self.model, validation, config.batch_size)
        except NumericalError as exc:
            raise self._abort(exc) from exc
        self.history.baseline_val_loss = best
        self.history.best_val_loss = best
        logger.info("Baseline validation loss %.4f", best)
        self.last_good_checkpoint = self._save("best.npz")
        wait = 0
        trained = 0
        for pass_index in range(config.passes):
            for source_chunk, batch in _prefetch(stream.training()):
                if trained >= config.max_chunks:
                    logger.info("Reached max_chunks=%d", config.max_chunks)
                    return self.history
                started = time.perf_counter()
                lr = self.optimizer.learning_rate
                try:
                    train_loss = self._train_chunk(batch, trained)
                    val_loss = evaluate(self.model, validation, config.batch_size)
                except NumericalError as exc:
                    raise self._abort(exc) from exc
                if val_loss < best - config.improvement_threshold:
                    best = val_loss
                    wait = 0
                    self.history.best_val_loss = best
                    self._save("best.npz")
                else:
                    wait += 1
                self.history.append(
                    TrainRecord(
                        chunk=trained,
                        source_chunk=source_chunk,
                        train_loss=train_loss,
                        val_loss=val_loss,
                        lr=lr,
                        seconds=time.perf_counter() - started,
                    )
                )
                logger.info(
                    "pass %d chunk %d (file %d): train %.4f val %.4f lr %.2e",
                    pass_index,
                    trained,
                    source_chunk,
                    train_loss,
                    val_loss,
                    lr,
                )
                if wait >= config.patience_chunks:
                    self.optimizer.learning_rate = lr * config.lr_decay_factor
                    wait = 0
                    logger.info("No improvement for %d chunks; learning rate -> %.2e", config.patience_chunks, self.optimizer.learning_rate)
                self.last_good_checkpoint = self._save("latest.npz") or self.last_good_checkpoint
                if self.checkpoint_dir is not None:
                    write_history(self.history, self.checkpoint_dir / "history.csv")
                trained += 1
                if self.optimizer.learning_rate < config.min_lr:
                    logger.info("Learning rate fell below %.1e; stopping", config.min_lr)
                    return self.history
        return self.history


def train(
    model: LstmModel,
    stream: ChunkStream,
    vocab: TokenVocab,
    config: Optional[TrainConfig] = None,
    checkpoint_dir: Optional[Path] = None,
    optimizer: Optional[Optimizer] = None,
    progress: bool = False,
) -> Tuple[LstmModel, TrainHistory]:
    """
    Train ``model`` on a chunk stream.

    Args:
        model: Network, updated in place
        stream: Validation chunk plus training chunks
        vocab: Vocabulary stored with checkpoints
        config: Schedule, defaults to TrainConfig()
        checkpoint_dir: Where latest.npz, best.npz and history.csv go; None keeps nothing on disk.
            best.npz is first written with the untrained weights and replaced on every improvement
        optimizer: Update rule, defaults to the one named in the config
        progress: Show mini-batch progress bars

    Returns:
        (trained model, history)
    """
    trainer = Trainer(model, vocab, config, checkpoint_dir, optimizer, progress)
    history = trainer.fit(stream)
    return model, history
