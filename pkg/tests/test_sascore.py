"""Tests for the synthetic accessibility score and its fragment table."""

import numpy as np
import pytest

from src.chem.descriptors import neutralize
from src.chem.graph import permute
from src.chem.sascore import FragmentScoreTable, circular_fragments, complexity_penalty, sa_score
from src.chem.smiles import parse
from src.errors import DataError
from src.models.molecule import Atom, MolGraph


class TestFragments:
    def test_fragments_do_not_depend_on_atom_order(self, corpus):
        rng = np.random.default_rng(2)
        for s in corpus:
            g = parse(s)
            assert circular_fragments(permute(g, list(rng.permutation(g.num_atoms)))) == circular_fragments(g), s

    def test_single_atom_has_one_fragment(self):
        assert sum(circular_fragments(parse("C")).values()) == 1


class TestScore:
    """Score range and ordering."""

    def test_scores_within_range(self, corpus, fragment_table):
        for s in corpus:
            score = sa_score(neutralize(parse(s)), fragment_table)
            assert 1.0 <= score <= 10.0, s

    def test_common_molecule_scores_easy(self, fragment_table):
        """A molecule dominating the reference corpus is easy to make."""
        assert sa_score(parse("Cc1ccccc1"), fragment_table) < 3.0

    def test_unseen_fragments_score_harder(self, fragment_table):
        common = sa_score(parse("Cc1ccccc1"), fragment_table)
        unseen = sa_score(parse("FC(F)(F)C#CC1(Br)CC1I"), fragment_table)
        assert unseen > common

    def test_spiro_center_adds_penalty(self):
        spiro = complexity_penalty(parse("C1CCC2(CC1)CCCCC2"))
        linked = complexity_penalty(parse("C1CCC(CC1)C1CCCC1"))
        assert spiro > linked

    def test_atom_order_does_not_matter(self, corpus, fragment_table):
        rng = np.random.default_rng(4)
        for s in corpus:
            g = neutralize(parse(s))
            shuffled = permute(g, list(rng.permutation(g.num_atoms)))
            assert sa_score(shuffled, fragment_table) == pytest.approx(sa_score(g, fragment_table)), s

    def test_missing_table(self):
        with pytest.raises(DataError):
            sa_score(parse("CCO"), None)

    def test_no_heavy_atoms(self, fragment_table):
        with pytest.raises(DataError):
            sa_score(MolGraph(atoms=(Atom(element="H"),)), fragment_table)


class TestFragmentTable:
    """Building and persisting contributions."""

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            FragmentScoreTable.from_corpus([])

    def test_contributions_are_clipped(self, fragment_table):
        values = list(fragment_table.contributions.values())
        assert min(values) >= -4.0
        assert max(values) <= 2.5

    def test_save_and_load(self, fragment_table, temp_output_dir):
        path = temp_output_dir / "fragments.tsv"
        fragment_table.save(path)
        loaded = FragmentScoreTable.load(path)
        assert loaded.n_molecules == fragment_table.n_molecules
        assert loaded.contributions.keys() == fragment_table.contributions.keys()
        g = parse("CC(=O)Nc1ccc(O)cc1")
        assert sa_score(g, loaded) == pytest.approx(sa_score(g, fragment_table), abs=1e-5)

    def test_load_rejects_other_files(self, temp_output_dir):
        path = temp_output_dir / "fragments.tsv"
        path.write_text("hello\n", encoding="utf-8")
        with pytest.raises(DataError):
            FragmentScoreTable.load(path)

    def test_load_missing_file(self, temp_output_dir):
        with pytest.raises(DataError):
            FragmentScoreTable.load(temp_output_dir / "absent.tsv")
