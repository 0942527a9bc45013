"""Character vocabularies, one-hot vectorization and the chunked on-disk tensor format.

Every SMILES line is framed as ``"!" + smiles + "E"`` and padded with further ``E``
characters to the vocabulary's ``max_len``. Chunk files hold bit-packed one-hot rows
behind a little-endian header carrying the vocabulary hash, so a chunk can never be
read against the wrong vocabulary.
"""

import hashlib
import logging
import struct
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import DataError

logger = logging.getLogger(__name__)

START_CHAR = "!"
END_CHAR = "E"
VOCAB_HEADER = "# smiles-vocab v1"

CHUNK_MAGIC = b"SMCH"
CHUNK_VERSION = 1
# magic, version, vocab hash, rows, max_len, vocab size, chunk index, validation flag
CHUNK_HEADER = struct.Struct("<4sH16sIIIIB")
CHUNK_PATTERN = "chunk_{:05d}.bin"


class TokenVocab(BaseModel):
    """Ordered character set with start and end markers."""

    model_config = ConfigDict(frozen=True)

    chars: Tuple[str, ...] = Field(description="Distinct characters in index order")
    max_len: int = Field(gt=2, description="Padded sequence length, longest line + 2")

    @field_validator("chars")
    @classmethod
    def _check_chars(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if len(set(value)) != len(value):
            raise ValueError("vocabulary characters must be distinct")
        if any(len(c) != 1 for c in value):
            raise ValueError("vocabulary entries must be single characters")
        if START_CHAR not in value or END_CHAR not in value:
            raise ValueError("vocabulary must contain the start and end characters")
        return value

    @property
    def size(self) -> int:
        return len(self.chars)

    @property
    def char_to_index(self) -> Dict[str, int]:
        return {c: i for i, c in enumerate(self.chars)}

    @property
    def index_to_char(self) -> Dict[int, str]:
        return dict(enumerate(self.chars))

    @property
    def start_index(self) -> int:
        return self.chars.index(START_CHAR)

    @property
    def end_index(self) -> int:
        return self.chars.index(END_CHAR)

    def to_text(self) -> str:
        lines = [VOCAB_HEADER, f"max_len\t{self.max_len}"]
        lines += [f"{i}\t{c}" for i, c in enumerate(self.chars)]
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> bytes:
        """16-byte hash of the serialized vocabulary."""
        return hashlib.blake2b(self.to_text().encode("utf-8"), digest_size=16).digest()

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "TokenVocab":
        """
        Read a vocabulary file.

        Raises:
            DataError: If the file is missing or malformed
        """
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").split("\n")
        except OSError as exc:
            raise DataError(f"Cannot read vocabulary {path}: {exc}") from exc
        if not lines or lines[0] != VOCAB_HEADER:
            raise DataError(f"{path} is not a vocabulary file")
        try:
            key, value = lines[1].split("\t")
            if key != "max_len":
                raise ValueError(key)
            max_len = int(value)
            entries = [line.split("\t", 1) for line in lines[2:] if line]
            chars = [c for _, c in sorted(((int(i), c) for i, c in entries))]
            return cls(chars=tuple(chars), max_len=max_len)
        except (IndexError, ValueError) as exc:
            raise DataError(f"Malformed vocabulary file {path}: {exc}") from exc


class OneHotBatch(BaseModel):
    """One-hot tensor of shape (batch, max_len, vocab_size)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(description="uint8 array with exactly one 1 per (sample, position)")

    @model_validator(mode="after")
    def _check_one_hot(self) -> "OneHotBatch":
        if self.data.ndim != 3:
            raise ValueError(f"expected a 3-d array, got shape {self.data.shape}")
        if self.data.size and not np.all(self.data.sum(axis=2) == 1):
            raise ValueError("every position must hold exactly one hot entry")
        return self

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.data.shape[0]

    def indices(self) -> np.ndarray:
        return self.data.argmax(axis=2)

    def as_float(self, dtype=np.float64) -> np.ndarray:
        return self.data.astype(dtype)

    def take(self, rows: Sequence[int]) -> "OneHotBatch":
        return OneHotBatch(data=self.data[np.asarray(rows)])


def _clean_lines(corpus: Iterable[str]) -> Iterator[str]:
    for line in corpus:
        line = line.strip()
        if line:
            yield line


def build_vocab(corpus: Iterable[str]) -> TokenVocab:
    """
    Build the character vocabulary of a corpus.

    Args:
        corpus: SMILES lines; blank lines are ignored

    Returns:
        Sorted characters plus the start and end markers, max_len = longest line + 2

    Raises:
        DataError: If the corpus has no lines
    """
    chars = set()
    longest = 0
    count = 0
    for line in _clean_lines(corpus):
        chars.update(line)
        longest = max(longest, len(line))
        count += 1
    if count == 0:
        raise DataError("Cannot build a vocabulary from an empty corpus")
    if START_CHAR in chars or END_CHAR in chars:
        raise DataError("Corpus uses a reserved start or end character")
    vocab = TokenVocab(chars=tuple(sorted(chars | {START_CHAR, END_CHAR})), max_len=longest + 2)
    logger.info("Vocabulary: %d characters, max_len %d, from %d lines", vocab.size, vocab.max_len, count)
    return vocab


def encode_indices(smiles: Sequence[str], vocab: TokenVocab) -> np.ndarray:
    """
    Index matrix of framed and padded lines, shape (batch, max_len).

    Raises:
        DataError: On an unknown character or a line longer than max_len - 2
    """
    lookup = vocab.char_to_index
    out = np.full((len(smiles), vocab.max_len), vocab.end_index, dtype=np.int64)
    for row, line in enumerate(smiles):
        if len(line) > vocab.max_len - 2:
            raise DataError(f"Line {row} has {len(line)} characters, limit is {vocab.max_len - 2}")
        framed = START_CHAR + line + END_CHAR
        try:
            out[row, : len(framed)] = [lookup[c] for c in framed]
        except KeyError as exc:
            raise DataError(f"Line {row} contains a character outside the vocabulary: {exc.args[0]!r}") from exc
    return out


def one_hot(indices: np.ndarray, vocab_size: int) -> np.ndarray:
    return np.eye(vocab_size, dtype=np.uint8)[indices]


def encode_batch(smiles: Sequence[str], vocab: TokenVocab) -> OneHotBatch:
    """One-hot encode SMILES lines as ``!`` + line + ``E`` padded with ``E``."""
    return OneHotBatch(data=one_hot(encode_indices(smiles, vocab), vocab.size))


def decode_row(indices: Sequence[int], vocab: TokenVocab) -> str:
    """Characters between the start marker and the first end marker."""
    chars = vocab.index_to_char
    text = []
    for position, index in enumerate(indices):
        char = chars[int(index)]
        if position == 0 and char == START_CHAR:
            continue
        if char == END_CHAR:
            break
        text.append(char)
    return "".join(text)


def decode_batch(batch: OneHotBatch, vocab: TokenVocab) -> List[str]:
    return [decode_row(row, vocab) for row in batch.indices()]


class ChunkHeader(BaseModel):
    """Header of one chunk file."""

    vocab_hash: bytes = Field(description="Digest of the vocabulary the rows were encoded with")
    rows: int = Field(ge=0)
    max_len: int = Field(gt=0)
    vocab_size: int = Field(gt=0)
    index: int = Field(ge=0, description="Position of the chunk in the stream")
    validation: bool = Field(description="Chunk reserved for validation")


def write_chunk(path: Path, batch: OneHotBatch, vocab: TokenVocab, index: int) -> ChunkHeader:
    """Write one chunk; chunk 0 is flagged as the validation chunk."""
    rows, max_len, vocab_size = batch.shape
    if (max_len, vocab_size) != (vocab.max_len, vocab.size):
        raise DataError("Batch shape does not match the vocabulary")
    header = ChunkHeader(
        vocab_hash=vocab.digest,
        rows=rows,
        max_len=max_len,
        vocab_size=vocab_size,
        index=index,
        validation=index == 0,
    )
    packed = CHUNK_HEADER.pack(
        CHUNK_MAGIC, CHUNK_VERSION, header.vocab_hash, rows, max_len, vocab_size, index, int(header.validation)
    )
    body = np.packbits(batch.data.reshape(-1)).tobytes()
    Path(path).write_bytes(packed + body)
    return header


def write_chunks(smiles: Sequence[str], vocab: TokenVocab, out_dir: Path, chunk_size: int) -> List[Path]:
    """
    Split lines into chunk files ``chunk_00000.bin``, ``chunk_00001.bin``, ...

    The last chunk keeps its shorter length.
    """
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, start in enumerate(range(0, len(smiles), chunk_size)):
        path = out_dir / CHUNK_PATTERN.format(index)
        write_chunk(path, encode_batch(smiles[start : start + chunk_size], vocab), vocab, index)
        paths.append(path)
    logger.info("Wrote %d chunks of up to %d sequences to %s", len(paths), chunk_size, out_dir)
    return paths


def read_chunk(path: Path, vocab: TokenVocab) -> Tuple[ChunkHeader, OneHotBatch]:
    """
    Read one chunk file and check it against the vocabulary.

    Raises:
        DataError: On a corrupt header, a truncated body or a vocabulary mismatch
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"Cannot read chunk {path}: {exc}") from exc
    if len(raw) < CHUNK_HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, digest, rows, max_len, vocab_size, index, validation = CHUNK_HEADER.unpack_from(raw)
    if magic != CHUNK_MAGIC or version != CHUNK_VERSION:
        raise DataError(f"{path}: not a chunk file (magic {magic!r}, version {version})")
    if digest != vocab.digest or (max_len, vocab_size) != (vocab.max_len, vocab.size):
        raise DataError(f"{path}: encoded with a different vocabulary")
    n_bits = rows * max_len * vocab_size
    body = np.frombuffer(raw, dtype=np.uint8, offset=CHUNK_HEADER.size)
    if body.size != (n_bits + 7) // 8:
        raise DataError(f"{path}: body holds {body.size} bytes, expected {(n_bits + 7) // 8}")
    data = np.unpackbits(body, count=n_bits).reshape(rows, max_len, vocab_size)
    header = ChunkHeader(
        vocab_hash=digest,
        rows=rows,
        max_len=max_len,
        vocab_size=vocab_size,
        index=index,
        validation=bool(validation),
    )
    try:
        return header, OneHotBatch(data=data)
    except ValueError as exc:
        raise DataError(f"{path}: corrupt one-hot body") from exc


def chunk_paths(data_dir: Path) -> List[Path]:
    """Chunk files of a directory in stream order."""
    paths = sorted(Path(data_dir).glob("chunk_*.bin"))
    if not paths:
        raise DataError(f"No chunk files in {data_dir}")
    return paths


def read_chunks(data_dir: Path, vocab: TokenVocab) -> Iterator[Tuple[ChunkHeader, OneHotBatch]]:
    """Stream every chunk of a directory in order."""
    for path in chunk_paths(data_dir):
        yield read_chunk(path, vocab)
