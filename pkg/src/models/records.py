"""Result records produced by the descriptor, sampling, training and analysis stages."""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class ParseErrorClass(str, Enum):
    """Failure categories of malformed SMILES strings."""

    UNCLOSED_PARENTHESIS = "unclosed_parenthesis"
    UNMATCHED_RING_CLOSURE = "unmatched_ring_closure"
    BAD_VALENCE = "bad_valence"
    LEXICAL = "lexical"
    OTHER = "other"


class ParseError(BaseModel):
    """Serializable description of a parse failure."""

    position: int = Field(description="Character offset of the failure")
    error_class: ParseErrorClass = Field(description="Failure category")
    message: str = Field(default="", description="Human readable detail")


class DescriptorRecord(BaseModel):
    """Computed properties of one molecule."""

    smiles: str = Field(default="", description="Canonical SMILES of the molecule")
    mw: float = Field(gt=0, description="Molecular weight in g/mol")
    logp: float = Field(description="Atom-contribution octanol/water logP")
    tpsa: float = Field(ge=0, description="Topological polar surface area in square angstrom")
    hba: int = Field(ge=0, description="Hydrogen bond acceptors (N + O count)")
    hbd: int = Field(ge=0, description="Hydrogen bond donors (H on N or O)")
    rot_bonds: int = Field(ge=0, description="Rotatable bonds")
    sa_score: Optional[float] = Field(
        default=None, ge=1.0, le=10.0, description="Synthetic accessibility, 1 easy to 10 hard"
    )
    fragment_like: bool = Field(default=False, description="Passes the fragment-like subset rules")
    drug_like: bool = Field(default=False, description="Passes the drug-like subset rules")


class GenerationResult(BaseModel):
    """One sampled string and its validity."""

    raw: str = Field(description="Generated characters without start and end markers")
    valid: bool = Field(description="Whether the string parses into a sanitized molecule")
    error: Optional[ParseError] = Field(default=None, description="Failure when invalid")
    canonical: Optional[str] = Field(default=None, description="Canonical SMILES when valid")
    trace: Optional[List[List[float]]] = Field(
        default=None, description="Per-step distributions the sampler drew from"
    )

    @model_validator(mode="after")
    def _check_status(self) -> "GenerationResult":
        if self.valid != (self.canonical is not None):
            raise ValueError("canonical must be present exactly when the result is valid")
        if not self.valid and self.error is None:
            raise ValueError("invalid results carry a parse error")
        return self

    @property
    def status(self) -> str:
        return "valid" if self.valid else f"invalid({self.error.error_class.value})"


class BatchSummary(BaseModel):
    """Aggregate statistics of a generated batch."""

    count: int = Field(ge=0, description="Number of strings generated")
    valid_count: int = Field(ge=0, description="Number of valid strings")
    unique_count: int = Field(ge=0, description="Distinct canonical SMILES among valid strings")
    valid_fraction: float = Field(ge=0, le=1, description="valid_count / count")
    unique_fraction: float = Field(ge=0, le=1, description="unique_count / valid_count")
    error_classes: Dict[str, int] = Field(default_factory=dict, description="Invalid counts per error class")


class NoveltyReport(BaseModel):
    """Overlap between generated molecules and a training set."""

    generated_count: int = Field(ge=0, description="Non-empty lines in the generated file")
    valid_lines: int = Field(ge=0, description="Generated lines that parse")
    valid_count: int = Field(ge=0, description="Distinct valid canonical molecules")
    found_in_training: int = Field(ge=0, description="Distinct valid molecules present in training")
    novel_fraction: float = Field(ge=0, le=1, description="1 - found_in_training / valid_count")

    @model_validator(mode="after")
    def _check_counts(self) -> "NoveltyReport":
        if self.found_in_training > self.valid_count:
            raise ValueError("found_in_training cannot exceed valid_count")
        return self


class HistogramSpec(BaseModel):
    """Binned distribution of one property across labeled datasets."""

    property: str = Field(description="Descriptor name")
    edges: List[float] = Field(description="Strictly increasing bin edges")
    counts: Dict[str, List[int]] = Field(description="Counts per bin keyed by dataset label")
    skipped: Dict[str, int] = Field(default_factory=dict, description="Invalid lines skipped per label")
    ks: Dict[str, float] = Field(
        default_factory=dict, description="KS distance per 'label_a|label_b' pair"
    )

    @model_validator(mode="after")
    def _check_edges(self) -> "HistogramSpec":
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")
        for label, values in self.counts.items():
            if len(values) != len(self.edges) - 1:
                raise ValueError(f"counts for {label} do not match the bin count")
        return self


class TrainRecord(BaseModel):
    """Metrics of one trained chunk."""

    chunk: int = Field(ge=0, description="Running count of trained chunks")
    source_chunk: int = Field(default=0, ge=0, description="Index of the chunk file that was trained on")
    train_loss: float = Field(description="Mean training loss over the chunk")
    val_loss: float = Field(description="Validation loss after the chunk")
    lr: float = Field(gt=0, description="Learning rate used for the chunk")
    seconds: float = Field(ge=0, description="Wall time spent on the chunk")


class TrainHistory(BaseModel):
    """Per-chunk training history."""

    records: List[TrainRecord] = Field(default_factory=list)
    baseline_val_loss: Optional[float] = Field(default=None, description="Validation loss before training")
    best_val_loss: Optional[float] = Field(default=None, description="Lowest validation loss seen")

    def append(self, record: TrainRecord) -> None:
        if self.records and record.chunk <= self.records[-1].chunk:
            raise ValueError("chunk indices must increase")
        self.records.append(record)

    @property
    def learning_rates(self) -> List[float]:
        return [r.lr for r in self.records]

    def to_rows(self) -> List[Dict[str, float]]:
        return [r.model_dump() for r in self.records]


class PercentilePick(BaseModel):
    """Compounds nearest one percentile of a score distribution."""

    percentile: float = Field(ge=0, le=100, description="Requested percentile")
    threshold: float = Field(description="Score at that percentile (nearest rank)")
    smiles: List[str] = Field(default_factory=list, description="Selected canonical SMILES")
    scores: List[float] = Field(default_factory=list, description="Scores of the selected compounds")


class PrepareReport(BaseModel):
    """Outcome of the corpus preparation workflow."""

    lines_read: int = Field(ge=0, description="Non-empty input lines")
    kept: int = Field(ge=0, description="Lines that tokenized and were encoded")
    dropped: int = Field(ge=0, description="Lines that failed tokenization")
    max_len: int = Field(gt=0, description="Padded sequence length")
    vocab_size: int = Field(gt=0, description="Characters including start and end markers")
    chunks: int = Field(ge=0, description="Chunk files written, validation chunk included")
    vocab_path: str = Field(description="Written vocabulary file")
    chunk_dir: str = Field(description="Directory holding the chunk files")
