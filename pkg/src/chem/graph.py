"""Ring perception, hydrogen assignment and valence checks on MolGraph."""

import logging
from typing import Dict, List, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, Field

from src.errors import UnsupportedElementError
from src.models.molecule import Atom, Bond, BondOrder, MolGraph

logger = logging.getLogger(__name__)

# Periodic group and row of every supported element. Charged atoms take the
# valences of their isoelectronic neighbor in the same row (N+ behaves like C).
_GROUP_ROW: Dict[str, Tuple[int, int]] = {
    "H": (1, 1),
    "B": (13, 2),
    "C": (14, 2),
    "N": (15, 2),
    "O": (16, 2),
    "F": (17, 2),
    "P": (15, 3),
    "S": (16, 3),
    "Cl": (17, 3),
    "Br": (17, 4),
    "I": (17, 5),
}

_ROW2_VALENCES: Dict[int, Tuple[int, ...]] = {13: (3,), 14: (4,), 15: (3,), 16: (2,), 17: (1,), 18: (0,)}
_HEAVY_ROW_VALENCES: Dict[int, Tuple[int, ...]] = {
    13: (3,),
    14: (4,),
    15: (3, 5),
    16: (2, 4, 6),
    17: (1,),
    18: (0,),
}

# Atoms that donate a lone pair to an aromatic ring instead of a pi bond.
_LONE_PAIR_AROMATICS = ("O", "S")


class ValenceViolation(BaseModel):
    """A single atom whose bonds exceed its allowed valence."""

    atom_index: int = Field(description="Index of the offending atom")
    reason: str = Field(description="Human readable explanation")


def allowed_valences(element: str, charge: int = 0) -> Tuple[int, ...]:
    """
    Allowed total valences for an element with a formal charge.

    Args:
        element: Element symbol
        charge: Formal charge

    Returns:
        Ascending tuple of legal valences; empty when the charge leaves no legal state

    Raises:
        UnsupportedElementError: If the element is not in the valence table
    """
    if element not in _GROUP_ROW:
        raise UnsupportedElementError(element)
    group, row = _GROUP_ROW[element]
    if element == "H":
        return (1,) if charge == 0 else (0,)
    effective = group - charge
    table = _ROW2_VALENCES if row == 2 else _HEAVY_ROW_VALENCES
    return table.get(effective, ())


def bond_valence(atom_index: int, adj: Sequence[Sequence[Tuple[int, Bond]]]) -> Tuple[int, int]:
    """Sum of bond valences around an atom and the number of aromatic bonds."""
    total = 0
    aromatic = 0
    for _, bond in adj[atom_index]:
        total += bond.order.valence
        if bond.order == BondOrder.AROMATIC:
            aromatic += 1
    return total, aromatic


def _aromatic_pi_share(atom: Atom, bonds: int, aromatic_bonds: int, hydrogens: int, max_valence: int) -> int:
    if not atom.is_aromatic or aromatic_bonds < 2 or atom.element in _LONE_PAIR_AROMATICS:
        return 0
    return 1 if bonds + hydrogens + 1 <= max_valence else 0


def organic_implicit_h(atom: Atom, bonds: int, aromatic_bonds: int) -> int:
    """
    Hydrogens an organic-subset atom receives: fill to the lowest legal valence.

    Args:
        atom: The atom (charge and aromaticity are honored)
        bonds: Sum of bond valences, aromatic bonds counted as one
        aromatic_bonds: Number of aromatic bonds on the atom

    Returns:
        Implicit hydrogen count (zero when the bonds already exceed every valence)
    """
    valences = allowed_valences(atom.element, atom.formal_charge)
    if not valences:
        return 0
    used = bonds + _aromatic_pi_share(atom, bonds, aromatic_bonds, 0, max(valences))
    for valence in valences:
        if valence >= used:
            return valence - used
    return 0


def perceive_rings(g: MolGraph) -> MolGraph:
    """
    Fill ``ring_systems`` with the smallest set of smallest rings and flag ring bonds.

    A bond is a ring bond exactly when it is not a bridge of the graph.

    Args:
        g: Graph with atoms and bonds populated

    Returns:
        New MolGraph with ``in_ring`` and ``ring_systems`` set
    """
    G = g.to_networkx()
    bridges = {frozenset(edge) for edge in nx.bridges(G)} if G.number_of_edges() else set()
    bonds = tuple(
        bond.model_copy(update={"in_ring": frozenset(bond.endpoints) not in bridges})
        for bond in g.bonds
    )
    rings = [frozenset(cycle) for cycle in nx.minimum_cycle_basis(G)]
    rings.sort(key=lambda ring: (len(ring), sorted(ring)))
    return g.model_copy(update={"bonds": bonds, "ring_systems": tuple(rings)})


def assign_implicit_hydrogens(g: MolGraph) -> MolGraph:
    """Return a copy where every non-bracket atom carries its implicit hydrogen count."""
    adj = g.adjacency()
    atoms = []
    for index, atom in enumerate(g.atoms):
        if atom.bracket:
            atoms.append(atom.model_copy(update={"implicit_h": 0}))
            continue
        bonds, aromatic = bond_valence(index, adj)
        atoms.append(atom.model_copy(update={"implicit_h": organic_implicit_h(atom, bonds, aromatic)}))
    return g.replace_atoms(tuple(atoms))


def check_valence(g: MolGraph) -> List[ValenceViolation]:
    """
    Check every atom against the valence table.

    Organic-subset atoms are filled to their lowest legal valence; bracket atoms use
    the hydrogen count written in the bracket.

    Args:
        g: Graph with rings perceived

    Returns:
        Violations, empty when every atom is legal

    Raises:
        UnsupportedElementError: For elements missing from the valence table
    """
    adj = g.adjacency()
    violations = []
    for index, atom in enumerate(g.atoms):
        try:
            valences = allowed_valences(atom.element, atom.formal_charge)
        except UnsupportedElementError as exc:
            raise UnsupportedElementError(atom.element, index) from exc
        bonds, aromatic = bond_valence(index, adj)
        if not valences:
            violations.append(
                ValenceViolation(
                    atom_index=index,
                    reason=f"{atom.element} with charge {atom.formal_charge:+d} has no legal valence",
                )
            )
            continue
        hydrogens = atom.explicit_h if atom.bracket else organic_implicit_h(atom, bonds, aromatic)
        used = bonds + hydrogens
        if used > max(valences):
            violations.append(
                ValenceViolation(
                    atom_index=index,
                    reason=f"{atom.element} valence {used} exceeds allowed {max(valences)}",
                )
            )
    return violations


def check_aromaticity(g: MolGraph) -> List[ValenceViolation]:
    """
    Aromatic atoms must lie in a ring whose bonds are all aromatic.

    Aromatic bonds must also join two aromatic ring atoms.
    """
    bonds_by_pair = {frozenset(b.endpoints): b for b in g.bonds}
    aromatic_rings = []
    for ring in g.ring_systems:
        ring_bonds = [bonds_by_pair[p] for p in _ring_pairs(ring, bonds_by_pair)]
        if ring_bonds and all(b.order == BondOrder.AROMATIC for b in ring_bonds):
            aromatic_rings.append(ring)
    covered = set().union(*aromatic_rings) if aromatic_rings else set()
    problems = []
    for index, atom in enumerate(g.atoms):
        if atom.is_aromatic and index not in covered:
            problems.append(ValenceViolation(atom_index=index, reason="aromatic atom outside an aromatic ring"))
    for bond in g.bonds:
        if bond.order != BondOrder.AROMATIC:
            continue
        if not bond.in_ring or not all(g.atoms[i].is_aromatic for i in bond.endpoints):
            problems.append(
                ValenceViolation(atom_index=bond.begin, reason="aromatic bond outside an aromatic ring")
            )
    return problems


def _ring_pairs(ring, bonds_by_pair) -> List[frozenset]:
    return [pair for pair in bonds_by_pair if pair <= ring]


def heavy_atom_count(g: MolGraph) -> int:
    return sum(1 for atom in g.atoms if atom.is_heavy)


def spiro_and_bridgehead_atoms(g: MolGraph) -> Tuple[int, int]:
    """
    Count spiro atoms and bridgehead atoms from the smallest ring set.

    Spiro atoms are the single atom shared by two rings; bridgeheads are the end atoms of
    a path of two or more bonds shared by two rings.
    """
    adj = g.adjacency()
    rings = list(g.ring_systems)
    spiro = set()
    bridgeheads = set()
    for a in range(len(rings)):
        for b in range(a + 1, len(rings)):
            shared = rings[a] & rings[b]
            if len(shared) == 1:
                spiro |= shared
            elif len(shared) >= 3:
                union = rings[a] | rings[b]
                for atom in shared:
                    if any(j in union and j not in shared for j, _ in adj[atom]):
                        bridgeheads.add(atom)
    return len(spiro), len(bridgeheads)


def fragments(g: MolGraph) -> List[List[int]]:
    """Atom indices of each connected component, ordered by lowest index."""
    G = g.to_networkx()
    return sorted((sorted(component) for component in nx.connected_components(G)), key=lambda c: c[0])


def subgraph(g: MolGraph, indices: Sequence[int]) -> MolGraph:
    """Induced subgraph over ``indices`` with atoms renumbered in the given order."""
    mapping = {old: new for new, old in enumerate(indices)}
    atoms = tuple(g.atoms[i] for i in indices)
    bonds = tuple(
        bond.model_copy(update={"begin": mapping[bond.begin], "end": mapping[bond.end]})
        for bond in g.bonds
        if bond.begin in mapping and bond.end in mapping
    )
    rings = tuple(frozenset(mapping[i] for i in ring) for ring in g.ring_systems if ring <= set(mapping))
    return MolGraph(atoms=atoms, bonds=bonds, ring_systems=rings)


def permute(g: MolGraph, order: Sequence[int]) -> MolGraph:
    """Relabel atoms so that new atom ``k`` is old atom ``order[k]``."""
    if sorted(order) != list(range(g.num_atoms)):
        raise ValueError("order must be a permutation of the atom indices")
    return subgraph(g, order)
