"""Tests for the corpus preparation workflow."""

import pytest

from src.encoding import TokenVocab, decode_batch, read_chunks
from src.errors import DataError
from src.pipeline import CHUNK_DIR, CORPUS_FILE, VOCAB_FILE, CorpusPreparationGraph, prepare
from tests.helpers import write_lines


class TestPrepare:
    """Filtering, shuffling and vectorizing a raw corpus."""

    def test_report_counts(self, temp_output_dir):
        raw = write_lines(temp_output_dir / "raw.smi", ["CCO", "CCX", "", "c1ccccc1", "[Se]"])
        report = prepare(raw, temp_output_dir / "data", chunk_size=10)
        assert report.lines_read == 4
        assert report.kept == 2
        assert report.dropped == 2
        assert report.chunks == 1
        assert report.max_len == len("c1ccccc1") + 2

    def test_three_lines_two_chunks(self, temp_output_dir):
        raw = write_lines(temp_output_dir / "raw.smi", ["CC", "CO", "CN"])
        report = prepare(raw, temp_output_dir / "data", chunk_size=2)
        assert report.chunks == 2
        assert sorted(p.name for p in (temp_output_dir / "data" / CHUNK_DIR).iterdir()) == [
            "chunk_00000.bin",
            "chunk_00001.bin",
        ]

    def test_chunks_decode_to_shuffled_corpus(self, corpus_path, corpus, temp_output_dir):
        out = temp_output_dir / "data"
        report = prepare(corpus_path, out, chunk_size=15, seed=3)
        vocab = TokenVocab.load(out / VOCAB_FILE)
        assert vocab.size == report.vocab_size
        shuffled = (out / CORPUS_FILE).read_text(encoding="utf-8").splitlines()
        assert sorted(shuffled) == sorted(corpus)
        decoded = []
        for _, batch in read_chunks(out / CHUNK_DIR, vocab):
            decoded.extend(decode_batch(batch, vocab))
        assert decoded == shuffled

    def test_same_seed_same_bytes(self, corpus_path, temp_output_dir):
        first, second = temp_output_dir / "a", temp_output_dir / "b"
        prepare(corpus_path, first, chunk_size=15, seed=7)
        prepare(corpus_path, second, chunk_size=15, seed=7)
        names = [VOCAB_FILE, CORPUS_FILE] + [f"{CHUNK_DIR}/chunk_{k:05d}.bin" for k in range(3)]
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_seed_changes_order(self, corpus_path, temp_output_dir):
        prepare(corpus_path, temp_output_dir / "a", chunk_size=15, seed=1)
        prepare(corpus_path, temp_output_dir / "b", chunk_size=15, seed=2)
        a = (temp_output_dir / "a" / CORPUS_FILE).read_text(encoding="utf-8")
        b = (temp_output_dir / "b" / CORPUS_FILE).read_text(encoding="utf-8")
        assert a != b


class TestPrepareErrors:
    """Failed steps surface as DataError."""

    def test_missing_corpus(self, temp_output_dir):
        with pytest.raises(DataError):
            CorpusPreparationGraph().prepare(temp_output_dir / "absent.smi", temp_output_dir / "data")

    def test_blank_corpus(self, temp_output_dir):
        raw = write_lines(temp_output_dir / "raw.smi", ["", "   "])
        with pytest.raises(DataError):
            prepare(raw, temp_output_dir / "data")

    def test_nothing_tokenizes(self, temp_output_dir):
        raw = write_lines(temp_output_dir / "raw.smi", ["CCX", "Q"])
        with pytest.raises(DataError):
            prepare(raw, temp_output_dir / "data")
        assert not (temp_output_dir / "data").exists()
