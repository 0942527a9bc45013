"""Tests for molecular descriptors and subset rules."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.chem.descriptors import (
    compute_descriptors,
    crippen_type,
    hba,
    hbd,
    logp,
    molecular_weight,
    neutralize,
    rotatable_bonds,
    tpsa,
    zinc_subset_flags,
)
from src.chem.graph import permute
from src.chem.smiles import parse
from src.errors import DataError
from src.models.molecule import MolGraph


class TestGoldenValues:
    """Hand-checked values for small molecules."""

    def test_molecular_weight(self):
        assert molecular_weight(parse("C")) == pytest.approx(16.043, abs=1e-3)
        assert molecular_weight(parse("c1ccccc1")) == pytest.approx(78.114, abs=1e-3)
        assert molecular_weight(parse("CC(C)Cc1ccc(cc1)C(C)C(=O)O")) == pytest.approx(206.285, abs=1e-2)

    def test_ethane_logp(self):
        assert logp(parse("CC")) == pytest.approx(1.0262, abs=1e-3)

    def test_methylene_increment(self):
        assert logp(parse("CCC")) - logp(parse("CC")) == pytest.approx(0.3901, abs=1e-3)

    def test_benzene_has_no_polar_surface(self):
        assert tpsa(parse("c1ccccc1")) == 0.0

    def test_nitromethane_tpsa(self):
        assert tpsa(parse("C[N+](=O)[O-]")) == pytest.approx(43.14, abs=0.01)

    @pytest.mark.parametrize("smiles, expected", [("c1ccncc1", 12.89), ("CC(=O)NC", 29.10)])
    def test_tpsa_contributions(self, smiles, expected):
        """Aromatic nitrogen and secondary amide (carbonyl O plus NH)."""
        assert tpsa(parse(smiles)) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize(
        "smiles, acceptors, donors",
        [
            ("CCO", 1, 1),
            ("CC(=O)O", 2, 1),
            ("CCN", 1, 2),
            ("C[N+](C)(C)C", 1, 0),
            ("c1ccccc1", 0, 0),
            ("NCC(=O)O", 3, 3),
        ],
    )
    def test_hydrogen_bond_counts(self, smiles, acceptors, donors):
        g = parse(smiles)
        assert hba(g) == acceptors
        assert hbd(g) == donors

    @pytest.mark.parametrize(
        "smiles, expected",
        [
            ("CCCC", 1),
            ("CCCCC", 2),
            ("c1ccccc1", 0),
            ("c1ccccc1c1ccccc1", 1),
            ("C1CCCCC1", 0),
            ("CC(=O)NC", 0),
            ("CC(=O)OC", 1),
            ("CC(=O)Nc1ccccc1", 1),
        ],
    )
    def test_rotatable_bonds(self, smiles, expected):
        """Ring, terminal and amide C-N bonds do not rotate."""
        assert rotatable_bonds(parse(smiles)) == expected

    def test_aromatic_carbon_type(self):
        g = parse("c1ccccc1")
        assert crippen_type(g, 0) == "C18"


class TestGoldenFile:
    """Descriptors of fifty small molecules against a stored table."""

    FLOAT_COLUMNS = ["mw", "logp", "tpsa"]
    INT_COLUMNS = ["hba", "hbd", "rot_bonds"]

    @pytest.fixture(scope="class")
    def goldens(self):
        return pd.read_csv(Path(__file__).parent / "fixtures" / "descriptor_goldens.csv")

    def test_table_size(self, goldens):
        assert len(goldens) == 50
        assert goldens["smiles"].is_unique

    def test_values_match_exactly(self, goldens):
        mismatches = []
        for row in goldens.itertuples(index=False):
            record = compute_descriptors(parse(row.smiles))
            for column in self.FLOAT_COLUMNS:
                if round(getattr(record, column), 5) != getattr(row, column):
                    mismatches.append(f"{row.smiles} {column}: {getattr(record, column)} != {getattr(row, column)}")
            for column in self.INT_COLUMNS:
                if getattr(record, column) != getattr(row, column):
                    mismatches.append(f"{row.smiles} {column}: {getattr(record, column)} != {getattr(row, column)}")
        assert not mismatches, "\n".join(mismatches)


class TestInvariants:
    """Properties every descriptor must satisfy."""

    def test_atom_order_does_not_matter(self, corpus):
        rng = np.random.default_rng(0)
        for s in corpus:
            g = parse(s)
            shuffled = permute(g, list(rng.permutation(g.num_atoms)))
            a, b = compute_descriptors(g), compute_descriptors(shuffled)
            assert b.mw == pytest.approx(a.mw)
            assert b.logp == pytest.approx(a.logp)
            assert b.tpsa == pytest.approx(a.tpsa)
            assert (b.hba, b.hbd, b.rot_bonds) == (a.hba, a.hbd, a.rot_bonds), s

    def test_disconnected_parts_add_up(self):
        whole, left, right = parse("CCO.c1ccccc1"), parse("CCO"), parse("c1ccccc1")
        assert molecular_weight(whole) == pytest.approx(molecular_weight(left) + molecular_weight(right))
        assert logp(whole) == pytest.approx(logp(left) + logp(right))
        assert tpsa(whole) == pytest.approx(tpsa(left) + tpsa(right))

    def test_empty_graph_rejected(self):
        with pytest.raises(DataError):
            molecular_weight(MolGraph())
        with pytest.raises(DataError):
            compute_descriptors(MolGraph())


class TestNeutralize:
    """Protonation-state cleanup before SA scoring."""

    def test_carboxylate_gains_hydrogen(self):
        g = neutralize(parse("CC(=O)[O-]"))
        assert all(atom.formal_charge == 0 for atom in g.atoms)
        assert hbd(g) == 1
        assert molecular_weight(g) == pytest.approx(molecular_weight(parse("CC(=O)O")))

    def test_ammonium_loses_hydrogen(self):
        g = neutralize(parse("CC[NH3+]"))
        nitrogen = g.atoms[2]
        assert nitrogen.formal_charge == 0
        assert nitrogen.total_h == 2

    def test_quaternary_nitrogen_is_kept(self):
        g = parse("C[N+](C)(C)C")
        assert neutralize(g) is g

    def test_nitro_group_is_kept(self):
        """The anionic oxygen next to the cationic nitrogen stays charged."""
        g = parse("C[N+](=O)[O-]")
        assert neutralize(g) is g


class TestSubsets:
    """Fragment-like and drug-like rules."""

    def test_small_molecule_is_fragment_like_only(self):
        record = compute_descriptors(parse("c1ccccc1"))
        assert record.fragment_like
        assert not record.drug_like

    def test_drug_like_values(self):
        assert zinc_subset_flags(300.0, 2.0, 60.0, 4, 1, 3) == (False, True)

    def test_polar_surface_limit_is_strict(self):
        _, drug = zinc_subset_flags(300.0, 2.0, 150.0, 4, 1, 3)
        assert not drug

    def test_sa_score_only_with_table(self, fragment_table):
        g = parse("CC(C)Cc1ccc(cc1)C(C)C(=O)O")
        assert compute_descriptors(g).sa_score is None
        assert 1.0 <= compute_descriptors(g, fragment_table).sa_score <= 10.0
