"""Data models for molecular graphs and pipeline results."""

from .molecule import Atom, Bond, BondOrder, MolGraph
from .records import (
    BatchSummary,
    DescriptorRecord,
    GenerationResult,
    HistogramSpec,
    NoveltyReport,
    ParseError,
    ParseErrorClass,
    PercentilePick,
    PrepareReport,
    TrainHistory,
    TrainRecord,
)

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "MolGraph",
    "BatchSummary",
    "DescriptorRecord",
    "GenerationResult",
    "HistogramSpec",
    "NoveltyReport",
    "ParseError",
    "ParseErrorClass",
    "PercentilePick",
    "PrepareReport",
    "TrainHistory",
    "TrainRecord",
]
