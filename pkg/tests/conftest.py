"""Pytest configuration and shared fixtures."""

import shutil
import tempfile
from pathlib import Path

import pytest

from src.chem.descriptors import neutralize
from src.chem.sascore import FragmentScoreTable
from src.chem.smiles import parse
from src.config import ModelConfig
from src.encoding import build_vocab
from src.network.model import LstmModel

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus_path():
    """Path to the fixture SMILES corpus."""
    return FIXTURES / "corpus.smi"


@pytest.fixture(scope="session")
def corpus(corpus_path):
    """Fixture corpus lines."""
    return [line.strip() for line in corpus_path.read_text(encoding="utf-8").splitlines() if line.strip()]


@pytest.fixture(scope="session")
def corpus_vocab(corpus):
    """Vocabulary built from the fixture corpus."""
    return build_vocab(corpus)


@pytest.fixture(scope="session")
def fragment_table(corpus):
    """SA fragment table built from a toluene-rich version of the corpus."""
    graphs = [neutralize(parse(s)) for s in corpus + ["Cc1ccccc1"] * 20]
    return FragmentScoreTable.from_corpus(graphs)


@pytest.fixture
def tiny_model(corpus_vocab):
    """Small untrained network over the corpus vocabulary."""
    config = ModelConfig(lstm_units=8, dense_units=8, dropout=0.0)
    return LstmModel.initialize(corpus_vocab.size, config, seed=0)


@pytest.fixture(scope="function")
def temp_output_dir():
    """Create a temporary directory for test outputs."""
    temp_dir = tempfile.mkdtemp(prefix="test_smiles_rnn_")
    yield Path(temp_dir)
    shutil.rmtree(temp_dir, ignore_errors=True)
