"""Molecular graph models: atoms, bonds and the immutable MolGraph."""

from enum import Enum
from typing import FrozenSet, List, Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SUPPORTED_ELEMENTS = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "H")
AROMATIC_ELEMENTS = ("B", "C", "N", "O", "P", "S")


class BondOrder(str, Enum):
    """Bond multiplicity as written in SMILES."""

    SINGLE = "single"
    DOUBLE = "double"
    TRIPLE = "triple"
    AROMATIC = "aromatic"

    @property
    def valence(self) -> int:
        """Valence contribution; aromatic bonds count one, the pi share is added per atom."""
        return {"single": 1, "double": 2, "triple": 3, "aromatic": 1}[self.value]

    @property
    def code(self) -> int:
        """Small integer used in invariants and hashes."""
        return {"single": 1, "double": 2, "triple": 3, "aromatic": 4}[self.value]


class Atom(BaseModel):
    """A single atom of a molecular graph."""

    model_config = ConfigDict(frozen=True)

    element: str = Field(description="Element symbol from the organic subset plus B and H")
    formal_charge: int = Field(default=0, ge=-2, le=2, description="Formal charge")
    is_aromatic: bool = Field(default=False, description="Lower-case aromatic atom")
    explicit_h: int = Field(default=0, ge=0, description="Hydrogens written in a bracket atom")
    implicit_h: int = Field(default=0, ge=0, description="Hydrogens filled from the valence table")
    isotope: Optional[int] = Field(default=None, description="Isotope mass number")
    bracket: bool = Field(default=False, description="Hydrogen count fixed by a bracket atom")

    @field_validator("element")
    @classmethod
    def _check_element(cls, value: str) -> str:
        if value not in SUPPORTED_ELEMENTS:
            raise ValueError(f"Unsupported element: {value}")
        return value

    @model_validator(mode="after")
    def _check_aromatic(self) -> "Atom":
        if self.is_aromatic and self.element not in AROMATIC_ELEMENTS:
            raise ValueError(f"Element {self.element} cannot be aromatic")
        return self

    @property
    def total_h(self) -> int:
        """Hydrogen count including implicit hydrogens."""
        return self.explicit_h + self.implicit_h

    @property
    def is_heavy(self) -> bool:
        return self.element != "H"


class Bond(BaseModel):
    """A bond between two atom indices."""

    model_config = ConfigDict(frozen=True)

    begin: int = Field(ge=0, description="Index of the first atom")
    end: int = Field(ge=0, description="Index of the second atom")
    order: BondOrder = Field(default=BondOrder.SINGLE, description="Bond order")
    in_ring: bool = Field(default=False, description="Bond lies on at least one cycle")

    @model_validator(mode="after")
    def _check_endpoints(self) -> "Bond":
        if self.begin == self.end:
            raise ValueError("Bond endpoints must be distinct")
        return self

    @property
    def endpoints(self) -> Tuple[int, int]:
        return self.begin, self.end

    def other(self, index: int) -> int:
        """Return the endpoint opposite to ``index``."""
        return self.end if index == self.begin else self.begin


class MolGraph(BaseModel):
    """Immutable molecular graph.

    Operations in ``src.chem`` never mutate a graph; they return a copy built with
    ``model_copy(update=...)``. ``ring_systems`` holds the smallest set of smallest
    rings once ``perceive_rings`` has been run.
    """

    model_config = ConfigDict(frozen=True)

    atoms: Tuple[Atom, ...] = Field(default_factory=tuple, description="Atoms in input order")
    bonds: Tuple[Bond, ...] = Field(default_factory=tuple, description="Bonds between atoms")
    ring_systems: Tuple[FrozenSet[int], ...] = Field(
        default_factory=tuple, description="Atom-index sets of the smallest rings"
    )

    @model_validator(mode="after")
    def _check_bonds(self) -> "MolGraph":
        seen = set()
        for bond in self.bonds:
            if bond.begin >= len(self.atoms) or bond.end >= len(self.atoms):
                raise ValueError(f"Bond {bond.endpoints} references a missing atom")
            key = frozenset(bond.endpoints)
            if key in seen:
                raise ValueError(f"Duplicate bond between atoms {bond.endpoints}")
            seen.add(key)
        return self

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def adjacency(self) -> List[List[Tuple[int, Bond]]]:
        """Neighbor lists of (neighbor index, bond) per atom."""
        adj: List[List[Tuple[int, Bond]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.begin].append((bond.end, bond))
            adj[bond.end].append((bond.begin, bond))
        return adj

    def get_bond(self, i: int, j: int) -> Optional[Bond]:
        """Get the bond joining two atoms, if any."""
        for bond in self.bonds:
            if {bond.begin, bond.end} == {i, j}:
                return bond
        return None

    def heavy_degree(self, index: int, adj: Optional[List[List[Tuple[int, Bond]]]] = None) -> int:
        """Number of non-hydrogen neighbors."""
        adj = adj if adj is not None else self.adjacency()
        return sum(1 for j, _ in adj[index] if self.atoms[j].is_heavy)

    def to_networkx(self) -> nx.Graph:
        """
        Convert the molecule to an undirected NetworkX graph.

        Node attributes carry element, charge, aromaticity and hydrogen count; edge
        attributes carry the bond order value.
        """
        G = nx.Graph()
        for index, atom in enumerate(self.atoms):
            G.add_node(
                index,
                element=atom.element,
                charge=atom.formal_charge,
                aromatic=atom.is_aromatic,
                hcount=atom.total_h,
                isotope=atom.isotope,
            )
        for bond in self.bonds:
            G.add_edge(bond.begin, bond.end, order=bond.order.value)
        return G

    def num_components(self) -> int:
        """Connected-component count."""
        if not self.atoms:
            return 0
        return nx.number_connected_components(self.to_networkx())

    def replace_atoms(self, atoms: Tuple[Atom, ...]) -> "MolGraph":
        """Copy of this graph with a new atom tuple and the same topology."""
        return self.model_copy(update={"atoms": tuple(atoms)})
