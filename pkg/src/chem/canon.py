"""Canonical atom ranking by iterative neighborhood refinement."""

import logging
from typing import List, Optional, Sequence, Tuple

from src.models.molecule import MolGraph

logger = logging.getLogger(__name__)

# Upper bound on explored tie-breaking leaves; highly symmetric graphs beyond it
# fall back to the first leaf found.
MAX_TIE_LEAVES = 512


def atom_invariants(g: MolGraph) -> List[Tuple]:
    """Initial invariant per atom: (element, charge, degree, H count, aromaticity, isotope)."""
    degree = [0] * g.num_atoms
    for bond in g.bonds:
        degree[bond.begin] += 1
        degree[bond.end] += 1
    return [
        (atom.element, atom.formal_charge, degree[i], atom.total_h, atom.is_aromatic, atom.isotope or 0)
        for i, atom in enumerate(g.atoms)
    ]


def _dense_ranks(keys: Sequence) -> List[int]:
    order = {key: rank for rank, key in enumerate(sorted(set(keys)))}
    return [order[key] for key in keys]


def _refine(classes: List[int], neighbors: List[List[Tuple[int, int]]]) -> List[int]:
    count = len(set(classes))
    while True:
        keys = [
            (classes[i], tuple(sorted((classes[j], order) for j, order in neighbors[i])))
            for i in range(len(classes))
        ]
        refined = _dense_ranks(keys)
        new_count = len(set(refined))
        if new_count == count:
            return refined
        classes, count = refined, new_count


def _certificate(ranks: List[int], invariants: List[Tuple], g: MolGraph) -> Tuple:
    by_rank = [None] * len(ranks)
    for atom, rank in enumerate(ranks):
        by_rank[rank] = invariants[atom]
    edges = sorted(
        (min(ranks[b.begin], ranks[b.end]), max(ranks[b.begin], ranks[b.end]), b.order.code) for b in g.bonds
    )
    return tuple(by_rank), tuple(edges)


def canonical_ranks(g: MolGraph) -> List[int]:
    """
    Assign every atom a canonical rank.

    Ranks start from the atom invariants, are refined with the sorted multiset of
    (neighbor rank, bond order) until stable, and remaining ties are broken by
    individualizing each member of the first tied class and keeping the labeling
    with the smallest certificate.

    Args:
        g: Valid molecular graph

    Returns:
        ``ranks[i]`` is the canonical position of atom ``i`` (a permutation of 0..n-1)
    """
    n = g.num_atoms
    if n == 0:
        return []
    invariants = atom_invariants(g)
    neighbors: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
    for bond in g.bonds:
        neighbors[bond.begin].append((bond.end, bond.order.code))
        neighbors[bond.end].append((bond.begin, bond.order.code))

    start = _refine(_dense_ranks(invariants), neighbors)
    if len(set(start)) == n:
        return start

    best: Optional[Tuple[Tuple, List[int]]] = None
    leaves = 0
    stack = [start]
    while stack:
        classes = stack.pop()
        if len(set(classes)) == n:
            leaves += 1
            cert = _certificate(classes, invariants, g)
            if best is None or cert < best[0]:
                best = (cert, classes)
            if leaves >= MAX_TIE_LEAVES:
                logger.debug("Tie-breaking budget exhausted after %d leaves", leaves)
                break
            continue
        counts = {}
        for value in classes:
            counts[value] = counts.get(value, 0) + 1
        tied = min(value for value, size in counts.items() if size > 1)
        members = [i for i in range(n) if classes[i] == tied]
        for member in reversed(members):
            keys = [(classes[i], 0 if i == member else 1) for i in range(n)]
            stack.append(_refine(_dense_ranks(keys), neighbors))
    return best[1]
