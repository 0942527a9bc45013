"""Stateful character-by-character generation with temperature-adjusted multinomial sampling."""

import logging
from collections import Counter
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.chem.smiles import validate, write_canonical
from src.config import SamplerConfig
from src.encoding import END_CHAR, START_CHAR, TokenVocab
from src.models.records import BatchSummary, GenerationResult, ParseError, ParseErrorClass

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


class StepModel(Protocol):
    """Anything that maps a one-hot input and a recurrent state to next-character probabilities."""

    vocab_size: int

    def initial_state(self, batch: Optional[int] = None): ...

    def step(self, x: np.ndarray, state) -> Tuple[np.ndarray, object]: ...


def apply_temperature(p: np.ndarray, temperature: float) -> np.ndarray:
    """
    Reshape a probability vector as exp(ln(p) / T), renormalized.

    Zero entries are floored at 1e-12 before the logarithm. ``temperature == 1``
    returns an unchanged copy.

    Args:
        p: Probability vector(s) along the last axis
        temperature: Positive temperature; below 1 sharpens, above 1 flattens

    Returns:
        Renormalized probabilities

    Raises:
        ValueError: If the temperature is not positive
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    p = np.asarray(p, dtype=np.float64)
    if temperature == 1.0:
        return p.copy()
    logits = np.log(np.maximum(p, PROBABILITY_FLOOR)) / temperature
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=-1, keepdims=True)


def sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector."""
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(p) - 1))


def _finish(raw: str, terminated: bool, trace: Optional[List[List[float]]] = None) -> GenerationResult:
    if not terminated:
        error = ParseError(position=len(raw), error_class=ParseErrorClass.OTHER, message="no end character before max_len")
        return GenerationResult(raw=raw, valid=False, error=error, trace=trace)
    outcome = validate(raw)
    if not outcome.valid:
        return GenerationResult(raw=raw, valid=False, error=outcome.error, trace=trace)
    return GenerationResult(raw=raw, valid=True, canonical=write_canonical(outcome.graph), trace=trace)


def generate_one(
    model: StepModel,
    vocab: TokenVocab,
    config: SamplerConfig,
    rng: np.random.Generator,
    trace: bool = False,
) -> GenerationResult:
    """
    Generate one string: reset the state, feed ``!``, then feed back every sampled
    character until ``E`` is drawn or the length cap is hit.

    Args:
        model: Stateful network
        vocab: Vocabulary the model was trained with
        config: Temperature and length cap
        rng: Private random generator of this molecule
        trace: Keep the per-step distributions the draws were made from

    Returns:
        GenerationResult; running into the cap gives invalid(other)
    """
    max_len = config.max_len or vocab.max_len
    eye = np.eye(vocab.size)
    state = model.initial_state()
    x = eye[vocab.start_index]
    chars = vocab.index_to_char
    out: List[str] = []
    steps: Optional[List[List[float]]] = [] if trace else None
    terminated = False
    for _ in range(max_len - 1):
        probs, state = model.step(x, state)
        p = apply_temperature(probs, config.temperature)
        if steps is not None:
            steps.append(p.tolist())
        index = sample_index(p, rng)
        if index == vocab.end_index:
            terminated = True
            break
        out.append(chars[index])
        x = eye[index]
    return _finish("".join(out), terminated, steps)


def _generate_block(
    model: StepModel, vocab: TokenVocab, config: SamplerConfig, rngs: Sequence[np.random.Generator]
) -> List[GenerationResult]:
    max_len = config.max_len or vocab.max_len
    eye = np.eye(vocab.size)
    rows = len(rngs)
    state = model.initial_state(rows)
    x = np.tile(eye[vocab.start_index], (rows, 1))
    out: List[List[str]] = [[] for _ in range(rows)]
    done = np.zeros(rows, dtype=bool)
    chars = vocab.index_to_char
    for _ in range(max_len - 1):
        probs, state = model.step(x, state)
        p = apply_temperature(probs, config.temperature)
        for row in np.flatnonzero(~done):
            index = sample_index(p[row], rngs[row])
            if index == vocab.end_index:
                done[row] = True
            else:
                out[row].append(chars[index])
            x[row] = eye[index]
        if done.all():
            break
    return [_finish("".join(chars_), bool(finished)) for chars_, finished in zip(out, done)]


def summarize(results: Sequence[GenerationResult]) -> BatchSummary:
    valid = [r for r in results if r.valid]
    unique = {r.canonical for r in valid}
    errors = Counter(r.error.error_class.value for r in results if not r.valid)
    return BatchSummary(
        count=len(results),
        valid_count=len(valid),
        unique_count=len(unique),
        valid_fraction=len(valid) / len(results) if results else 0.0,
        unique_fraction=len(unique) / len(valid) if valid else 0.0,
        error_classes=dict(errors),
    )


def generate_batch(
    model: StepModel,
    vocab: TokenVocab,
    config: SamplerConfig,
    block_size: int = 256,
    progress: bool = False,
) -> Tuple[List[GenerationResult], BatchSummary]:
    """
    Generate ``config.count`` strings.

    Every molecule draws from its own generator spawned from ``config.seed``, and
    molecules are stepped together in blocks that share the network's matrix products.

    Returns:
        (results in generation order, summary with valid and unique fractions)
    """
    children = np.random.SeedSequence(config.seed).spawn(config.count)
    rngs = [np.random.default_rng(child) for child in children]
    results: List[GenerationResult] = []
    for start in tqdm(range(0, config.count, block_size), desc="Sampling", disable=not progress):
        results.extend(_generate_block(model, vocab, config, rngs[start : start + block_size]))
    summary = summarize(results)
    logger.info(
        "Generated %d strings at T=%.2f: %.1f%% valid, %.1f%% unique",
        summary.count,
        config.temperature,
        100 * summary.valid_fraction,
        100 * summary.unique_fraction,
    )
    return results, summary


def write_results(results: Sequence[GenerationResult], path: Path, invalid_path: Optional[Path] = None) -> None:
    """Valid strings one per line; invalid strings with their error class in an optional sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{r.raw}\n" for r in results if r.valid), encoding="utf-8")
    if invalid_path is not None:
        lines = [f"{r.raw}\t{r.error.error_class.value}\n" for r in results if not r.valid]
        Path(invalid_path).write_text("".join(lines), encoding="utf-8")


__all__ = [
    "START_CHAR",
    "END_CHAR",
    "StepModel",
    "apply_temperature",
    "sample_index",
    "generate_one",
    "generate_batch",
    "summarize",
    "write_results",
]
