"""Exception hierarchy shared by the pipeline modules."""

from typing import Optional


class PipelineError(Exception):
    """Base class for errors raised by the generation pipeline."""


class DataError(PipelineError, ValueError):
    """Input data is missing, unreadable, corrupt or inconsistent."""


class UnsupportedElementError(DataError):
    """An atom carries an element outside the supported organic subset."""

    def __init__(self, element: str, atom_index: Optional[int] = None):
        self.element = element
        self.atom_index = atom_index
        where = f" at atom {atom_index}" if atom_index is not None else ""
        super().__init__(f"Unsupported element '{element}'{where}")


class NumericalError(PipelineError, ArithmeticError):
    """A tensor picked up NaN or Inf values."""

    def __init__(self, message: str, layer: Optional[str] = None):
        self.layer = layer
        super().__init__(message)


class TrainingAborted(NumericalError):
    """Training stopped on a non-finite loss; the last good checkpoint is kept."""

    def __init__(self, message: str, checkpoint: Optional[str] = None, layer: Optional[str] = None):
        self.checkpoint = checkpoint
        super().__init__(message, layer=layer)
