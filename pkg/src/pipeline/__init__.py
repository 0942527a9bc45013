"""Corpus preparation workflow."""

from .prepare_graph import CORPUS_FILE, CHUNK_DIR, VOCAB_FILE, CorpusPreparationGraph, prepare

__all__ = ["CorpusPreparationGraph", "prepare", "VOCAB_FILE", "CORPUS_FILE", "CHUNK_DIR"]
