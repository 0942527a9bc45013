"""Tests for the molecular graph model, ring perception and valence checks."""

import pytest
from pydantic import ValidationError

from src.chem.graph import (
    allowed_valences,
    check_valence,
    fragments,
    heavy_atom_count,
    perceive_rings,
    permute,
    spiro_and_bridgehead_atoms,
    subgraph,
)
from src.chem.smiles import parse
from src.errors import UnsupportedElementError
from src.models.molecule import Atom, Bond, BondOrder, MolGraph
from tests.helpers import isomorphic, simple_cycles


class TestMolGraphModel:
    """Validation of atoms, bonds and graphs."""

    def test_unsupported_element_rejected(self):
        """Atoms outside the supported element set cannot be built."""
        with pytest.raises(ValidationError):
            Atom(element="Se")

    def test_non_aromatic_element_cannot_be_aromatic(self):
        """Halogens have no aromatic form."""
        with pytest.raises(ValidationError):
            Atom(element="Cl", is_aromatic=True)

    def test_bond_to_missing_atom_rejected(self):
        """Bond endpoints must index existing atoms."""
        with pytest.raises(ValidationError):
            MolGraph(atoms=(Atom(element="C"),), bonds=(Bond(begin=0, end=1),))

    def test_duplicate_bond_rejected(self):
        """Two bonds between the same pair of atoms are not allowed."""
        atoms = (Atom(element="C"), Atom(element="C"))
        with pytest.raises(ValidationError):
            MolGraph(atoms=atoms, bonds=(Bond(begin=0, end=1), Bond(begin=1, end=0)))

    def test_graph_is_immutable(self):
        """Graphs are frozen models."""
        g = parse("CC")
        with pytest.raises(ValidationError):
            g.atoms = ()

    def test_aromatic_bond_counts_one(self):
        """Aromatic bonds contribute one to the sigma valence sum."""
        assert BondOrder.AROMATIC.valence == 1
        assert BondOrder.TRIPLE.valence == 3


class TestValenceTable:
    """Allowed valences per element and charge."""

    def test_neutral_valences(self):
        assert allowed_valences("C") == (4,)
        assert allowed_valences("N") == (3,)
        assert allowed_valences("S") == (2, 4, 6)
        assert allowed_valences("P") == (3, 5)

    def test_charged_atoms_use_isoelectronic_valence(self):
        """N+ behaves like C and O- like F."""
        assert allowed_valences("N", 1) == (4,)
        assert allowed_valences("O", -1) == (1,)

    def test_unknown_element_raises(self):
        with pytest.raises(UnsupportedElementError):
            allowed_valences("Xe")

    def test_pentavalent_carbon_is_flagged(self):
        """A carbon with five single bonds violates its valence."""
        atoms = tuple(Atom(element="C") for _ in range(6))
        bonds = tuple(Bond(begin=0, end=k) for k in range(1, 6))
        violations = check_valence(perceive_rings(MolGraph(atoms=atoms, bonds=bonds)))
        assert [v.atom_index for v in violations] == [0]

    def test_four_bonds_on_nitrogen_need_a_positive_charge(self):
        bonds = tuple(Bond(begin=0, end=k) for k in range(1, 5))
        carbons = tuple(Atom(element="C") for _ in range(4))
        neutral = MolGraph(atoms=(Atom(element="N"),) + carbons, bonds=bonds)
        charged = MolGraph(atoms=(Atom(element="N", formal_charge=1, bracket=True),) + carbons, bonds=bonds)
        assert [v.atom_index for v in check_valence(perceive_rings(neutral))] == [0]
        assert check_valence(perceive_rings(charged)) == []


class TestValenceSoundness:
    """Every legal molecule passes and one bond too many on any atom is caught."""

    def test_corpus_molecules_pass(self, corpus):
        for smiles in corpus:
            assert check_valence(parse(smiles)) == [], smiles

    def test_extra_bonds_flag_the_overloaded_atom(self, corpus):
        for smiles in corpus:
            g = parse(smiles)
            adj = g.adjacency()
            for index, atom in enumerate(g.atoms):
                used = sum(bond.order.valence for _, bond in adj[index])
                if atom.bracket:
                    used += atom.explicit_h
                extra = max(allowed_valences(atom.element, atom.formal_charge)) - used + 1
                start = g.num_atoms
                overloaded = MolGraph(
                    atoms=g.atoms + tuple(Atom(element="C") for _ in range(extra)),
                    bonds=g.bonds + tuple(Bond(begin=index, end=start + k) for k in range(extra)),
                )
                violations = check_valence(perceive_rings(overloaded))
                assert [v.atom_index for v in violations] == [index], f"{smiles} atom {index}"


class TestHydrogens:
    """Implicit hydrogen assignment."""

    def test_methane_has_four_hydrogens(self):
        assert parse("C").atoms[0].total_h == 4

    def test_aromatic_carbon_has_one_hydrogen(self):
        g = parse("c1ccccc1")
        assert all(atom.total_h == 1 for atom in g.atoms)

    def test_pyridine_nitrogen_has_no_hydrogen(self):
        g = parse("c1ccncc1")
        nitrogen = [a for a in g.atoms if a.element == "N"][0]
        assert nitrogen.total_h == 0

    def test_bracket_hydrogen_count_is_kept(self):
        g = parse("c1cc[nH]c1")
        nitrogen = [a for a in g.atoms if a.element == "N"][0]
        assert nitrogen.total_h == 1
        assert nitrogen.implicit_h == 0

    def test_hypervalent_sulfur_takes_next_valence(self):
        """Sulfur in a sulfone reaches valence six without hydrogens."""
        g = parse("CS(=O)(=O)C")
        sulfur = [a for a in g.atoms if a.element == "S"][0]
        assert sulfur.total_h == 0


class TestRings:
    """Ring perception and ring-topology counts."""

    def test_chain_has_no_rings(self):
        g = parse("CCCC")
        assert g.ring_systems == ()
        assert not any(b.in_ring for b in g.bonds)

    def test_cyclohexane_ring(self):
        g = parse("C1CCCCC1")
        assert len(g.ring_systems) == 1
        assert len(g.ring_systems[0]) == 6
        assert all(b.in_ring for b in g.bonds)

    def test_substituent_bond_is_not_in_ring(self):
        g = parse("Cc1ccccc1")
        methyl_bond = g.get_bond(0, 1)
        assert methyl_bond is not None
        assert not methyl_bond.in_ring

    def test_naphthalene_has_two_six_rings(self):
        g = parse("c1ccc2ccccc2c1")
        assert sorted(len(r) for r in g.ring_systems) == [6, 6]

    def test_spiro_atom_counted(self):
        spiro, bridgeheads = spiro_and_bridgehead_atoms(parse("C1CCC2(CC1)CCCCC2"))
        assert spiro == 1
        assert bridgeheads == 0

    def test_fused_rings_have_no_bridgeheads(self):
        """Rings sharing a single bond are fused, not bridged."""
        spiro, bridgeheads = spiro_and_bridgehead_atoms(parse("C1CCC2CCCCC2C1"))
        assert (spiro, bridgeheads) == (0, 0)

    def test_norbornane_bridgeheads(self):
        """Bicyclo[2.2.1]heptane has two bridgehead atoms."""
        spiro, bridgeheads = spiro_and_bridgehead_atoms(parse("C1CC2CCC1C2"))
        assert spiro == 0
        assert bridgeheads == 2


CAGES = [
    "C12C3C4C1C5C2C3C45",
    "C1C2CC3CC1CC(C2)C3",
    "C1CC2CCC1C2",
    "C1CCC2(CC1)CCCCC2",
    "C1CC1C1CC1",
]


class TestRingsAgainstCycleEnumeration:
    """Ring perception checked against every simple cycle of small molecules."""

    @pytest.fixture
    def small_graphs(self, corpus):
        graphs = [parse(smiles) for smiles in list(corpus) + CAGES]
        return [g for g in graphs if g.num_atoms <= 12]

    def test_ring_bonds_are_cycle_bonds(self, small_graphs):
        for g in small_graphs:
            cycle_bonds = set()
            for _, edges in simple_cycles(g):
                cycle_bonds |= edges
            flagged = {frozenset(b.endpoints) for b in g.bonds if b.in_ring}
            assert flagged == cycle_bonds

    def test_ring_count_is_cycle_rank(self, small_graphs):
        for g in small_graphs:
            assert len(g.ring_systems) == len(g.bonds) - g.num_atoms + g.num_components()

    def test_rings_are_simple_cycles(self, small_graphs):
        for g in small_graphs:
            cycles = simple_cycles(g)
            cycle_atoms = {atoms for atoms, _ in cycles}
            assert all(ring in cycle_atoms for ring in g.ring_systems)
            if cycles:
                assert min(len(ring) for ring in g.ring_systems) == min(len(atoms) for atoms in cycle_atoms)

    def test_cubane_basis_is_five_four_rings(self):
        """The cube graph has 28 simple cycles; five of its six faces form the smallest basis."""
        g = parse(CAGES[0])
        assert sorted(len(ring) for ring in g.ring_systems) == [4] * 5
        assert len(simple_cycles(g)) == 28


class TestGraphOperations:
    """Components, subgraphs and relabeling."""

    def test_heavy_atom_count_ignores_hydrogen_atoms(self):
        assert heavy_atom_count(parse("[H]C([H])([H])[H]")) == 1

    def test_fragments_of_disconnected_graph(self):
        g = parse("CCO.N")
        assert fragments(g) == [[0, 1, 2], [3]]
        assert g.num_components() == 2

    def test_permute_preserves_isomorphism(self):
        g = parse("CC(=O)Nc1ccc(O)cc1")
        order = list(reversed(range(g.num_atoms)))
        assert isomorphic(g, permute(g, order))

    def test_permute_rejects_non_permutation(self):
        g = parse("CCO")
        with pytest.raises(ValueError):
            permute(g, [0, 0, 1])

    def test_subgraph_keeps_internal_bonds(self):
        g = parse("CCO")
        sub = subgraph(g, [1, 2])
        assert sub.num_atoms == 2
        assert len(sub.bonds) == 1
        assert sub.atoms[1].element == "O"
