"""LangGraph workflow that turns a raw SMILES corpus into a vocabulary and one-hot chunk files."""

import logging
from pathlib import Path
from typing import List, Optional, TypedDict

import numpy as np
from langgraph.graph import END, StateGraph

from src.chem.smiles import SmilesError, tokenize
from src.encoding import TokenVocab, build_vocab, write_chunks
from src.errors import DataError
from src.models.records import PrepareReport

logger = logging.getLogger(__name__)

VOCAB_FILE = "vocab.txt"
CORPUS_FILE = "corpus.smi"
CHUNK_DIR = "chunks"


class PrepareState(TypedDict):
    """State for the preparation workflow."""

    data_path: str
    out_dir: str
    chunk_size: int
    seed: int
    lines: List[str]
    lines_read: int
    dropped: int
    vocab: Optional[TokenVocab]
    report: Optional[PrepareReport]
    error: str


class CorpusPreparationGraph:
    """Load, filter, shuffle, build the vocabulary and vectorize, one node per step."""

    def __init__(self, chunk_size: int = 100_000, seed: int = 0):
        """
        Initialize the workflow.

        Args:
            chunk_size: Sequences per chunk file
            seed: Seed of the line shuffle
        """
        self.chunk_size = chunk_size
        self.seed = seed
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(PrepareState)

        workflow.add_node("load_corpus", self._load_corpus)
        workflow.add_node("filter_tokenizable", self._filter_tokenizable)
        workflow.add_node("shuffle", self._shuffle)
        workflow.add_node("build_vocab", self._build_vocab)
        workflow.add_node("vectorize", self._vectorize)

        workflow.set_entry_point("load_corpus")
        workflow.add_edge("load_corpus", "filter_tokenizable")
        workflow.add_edge("filter_tokenizable", "shuffle")
        workflow.add_edge("shuffle", "build_vocab")
        workflow.add_edge("build_vocab", "vectorize")
        workflow.add_edge("vectorize", END)

        return workflow.compile()

    def _load_corpus(self, state: PrepareState) -> PrepareState:
        try:
            text = Path(state["data_path"]).read_text(encoding="utf-8")
        except OSError as exc:
            state["error"] = f"Cannot read corpus {state['data_path']}: {exc}"
            return state
        state["lines"] = [line.strip() for line in text.splitlines() if line.strip()]
        state["lines_read"] = len(state["lines"])
        logger.info("Read %d lines from %s", state["lines_read"], state["data_path"])
        if not state["lines"]:
            state["error"] = f"{state['data_path']} holds no SMILES lines"
        return state

    def _filter_tokenizable(self, state: PrepareState) -> PrepareState:
        if state.get("error"):
            return state
        kept = []
        for line in state["lines"]:
            try:
                tokenize(line)
            except SmilesError as exc:
                logger.debug("Dropping %r: %s", line, exc)
                continue
            kept.append(line)
        state["dropped"] = len(state["lines"]) - len(kept)
        state["lines"] = kept
        if state["dropped"]:
            logger.warning("Dropped %d lines that failed tokenization", state["dropped"])
        if not kept:
            state["error"] = "No line of the corpus tokenized"
        return state

    def _shuffle(self, state: PrepareState) -> PrepareState:
        if state.get("error"):
            return state
        rng = np.random.default_rng(state["seed"])
        order = rng.permutation(len(state["lines"]))
        state["lines"] = [state["lines"][i] for i in order]
        return state

    def _build_vocab(self, state: PrepareState) -> PrepareState:
        if state.get("error"):
            return state
        try:
            state["vocab"] = build_vocab(state["lines"])
        except DataError as exc:
            state["error"] = str(exc)
        return state

    def _vectorize(self, state: PrepareState) -> PrepareState:
        if state.get("error"):
            return state
        out_dir = Path(state["out_dir"])
        vocab = state["vocab"]
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            vocab.save(out_dir / VOCAB_FILE)
            (out_dir / CORPUS_FILE).write_text("".join(f"{line}\n" for line in state["lines"]), encoding="utf-8")
            paths = write_chunks(state["lines"], vocab, out_dir / CHUNK_DIR, state["chunk_size"])
        except (OSError, DataError) as exc:
            state["error"] = f"Error writing prepared data: {exc}"
            return state
        if len(paths) < 2:
            logger.warning("Only the validation chunk was written; lower chunk_size to train")
        state["report"] = PrepareReport(
            lines_read=state["lines_read"],
            kept=len(state["lines"]),
            dropped=state["dropped"],
            max_len=vocab.max_len,
            vocab_size=vocab.size,
            chunks=len(paths),
            vocab_path=str(out_dir / VOCAB_FILE),
            chunk_dir=str(out_dir / CHUNK_DIR),
        )
        return state

    def prepare(self, data_path: Path, out_dir: Path) -> PrepareReport:
        """
        Run the workflow.

        Args:
            data_path: One SMILES per line
            out_dir: Receives vocab.txt, the shuffled corpus.smi and chunks/

        Returns:
            PrepareReport with read, kept and dropped totals, max length and vocabulary size

        Raises:
            DataError: If any step failed
        """
        initial_state: PrepareState = {
            "data_path": str(data_path),
            "out_dir": str(out_dir),
            "chunk_size": self.chunk_size,
            "seed": self.seed,
            "lines": [],
            "lines_read": 0,
            "dropped": 0,
            "vocab": None,
            "report": None,
            "error": "",
        }

        result = self.graph.invoke(initial_state)

        if result.get("error"):
            raise DataError(result["error"])

        return result["report"]


def prepare(data_path: Path, out_dir: Path, chunk_size: int = 100_000, seed: int = 0) -> PrepareReport:
    """Shuffle, vectorize and chunk a SMILES corpus."""
    return CorpusPreparationGraph(chunk_size=chunk_size, seed=seed).prepare(data_path, out_dir)
