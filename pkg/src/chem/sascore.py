"""Synthetic accessibility score from circular-fragment frequencies and topological complexity.

Fragment contributions come from a table built over a reference corpus: common
fragments score high, unseen fragments get a fixed penalty. The raw score is the
mean fragment contribution minus complexity penalties (size, spiro atoms,
bridgeheads, macrocycles), rescaled so that 1 is easy and 10 is hard.
"""

import hashlib
import logging
import math
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from pydantic import BaseModel, Field
from tqdm import tqdm

from src.chem.graph import heavy_atom_count, spiro_and_bridgehead_atoms
from src.errors import DataError
from src.models.molecule import MolGraph

logger = logging.getLogger(__name__)

FRAGMENT_RADIUS = 2
UNKNOWN_FRAGMENT = -4.0
CONTRIBUTION_RANGE = (-4.0, 2.5)
MACROCYCLE_SIZE = 8
TABLE_HEADER = "# sa-fragments v1"


def _digest(*parts) -> int:
    payload = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=4).digest(), "little")


def circular_fragments(g: MolGraph, radius: int = FRAGMENT_RADIUS) -> Counter:
    """
    Count circular fragment identifiers up to ``radius`` bonds around every heavy atom.

    Identifiers start from (element, heavy degree, hydrogens, charge, isotope, ring
    membership) and are re-hashed with the sorted (bond order, neighbor identifier)
    pairs at each radius. A fragment whose bond set was already produced is skipped.

    Args:
        g: Graph with rings perceived and hydrogens assigned
        radius: Largest environment radius

    Returns:
        Counter of fragment identifier to occurrences
    """
    adj = g.adjacency()
    heavy = [i for i, atom in enumerate(g.atoms) if atom.is_heavy]
    ring_atoms = set().union(*g.ring_systems) if g.ring_systems else set()
    ids: Dict[int, int] = {}
    for i in heavy:
        atom = g.atoms[i]
        hydrogens = atom.total_h + sum(1 for j, _ in adj[i] if g.atoms[j].element == "H")
        ids[i] = _digest(
            atom.element, g.heavy_degree(i, adj), hydrogens, atom.formal_charge, atom.isotope or 0, i in ring_atoms
        )
    counts: Counter = Counter(ids.values())
    environments = {i: frozenset() for i in heavy}
    seen = set()
    for _ in range(radius):
        next_ids = {}
        next_env = {}
        for i in heavy:
            pairs = sorted((b.order.code, ids[j]) for j, b in adj[i] if j in ids)
            next_ids[i] = _digest(ids[i], *pairs)
            bonds = set(environments[i])
            for j, b in adj[i]:
                if j in ids:
                    bonds.add(frozenset(b.endpoints))
                    bonds |= environments[j]
            next_env[i] = frozenset(bonds)
        # duplicate environments keep the smallest identifier
        for i in sorted(heavy, key=lambda k: next_ids[k]):
            env = next_env[i]
            if env == environments[i] or env in seen:
                continue
            seen.add(env)
            counts[next_ids[i]] += 1
        ids, environments = next_ids, next_env
    return counts


class FragmentScoreTable(BaseModel):
    """Fragment identifier to log-frequency contribution."""

    contributions: Dict[int, float] = Field(default_factory=dict, description="Contribution per fragment id")
    n_molecules: int = Field(default=0, ge=0, description="Molecules the table was built from")
    unknown: float = Field(default=UNKNOWN_FRAGMENT, description="Contribution of unseen fragments")

    def contribution(self, fragment: int) -> float:
        return self.contributions.get(fragment, self.unknown)

    @classmethod
    def from_corpus(cls, graphs: Iterable[MolGraph], progress: bool = False) -> "FragmentScoreTable":
        """
        Build contributions as log10(count / (1% of the molecule count)), clipped.

        Raises:
            DataError: If the corpus holds no molecules
        """
        totals: Counter = Counter()
        n = 0
        for g in tqdm(graphs, desc="Fragmenting", disable=not progress):
            totals.update(circular_fragments(g))
            n += 1
        if n == 0:
            raise DataError("Cannot build a fragment table from an empty corpus")
        low, high = CONTRIBUTION_RANGE
        scale = n * 0.01
        contributions = {
            fragment: min(high, max(low, math.log10(count / scale))) for fragment, count in totals.items()
        }
        logger.info("Built fragment table: %d fragments from %d molecules", len(contributions), n)
        return cls(contributions=contributions, n_molecules=n)

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{TABLE_HEADER} n_molecules={self.n_molecules}"]
        lines += [f"{fragment}\t{value:.6f}" for fragment, value in sorted(self.contributions.items())]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "FragmentScoreTable":
        """
        Read a table written by ``save``.

        Raises:
            DataError: If the file is missing or malformed
        """
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise DataError(f"Cannot read fragment table {path}: {exc}") from exc
        if not lines or not lines[0].startswith(TABLE_HEADER):
            raise DataError(f"{path} is not a fragment score table")
        n_molecules = 0
        for field in lines[0][len(TABLE_HEADER):].split():
            key, _, value = field.partition("=")
            if key == "n_molecules" and value.isdigit():
                n_molecules = int(value)
        contributions = {}
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                fragment, value = line.split("\t")
                contributions[int(fragment)] = float(value)
            except ValueError as exc:
                raise DataError(f"{path}:{number}: expected 'fragment<TAB>value'") from exc
        return cls(contributions=contributions, n_molecules=n_molecules)


def complexity_penalty(g: MolGraph) -> float:
    """Size, spiro, bridgehead and macrocycle penalties; stereo contributes nothing."""
    n_atoms = heavy_atom_count(g)
    spiro, bridgeheads = spiro_and_bridgehead_atoms(g)
    size = n_atoms**1.005 - n_atoms
    macrocycle = math.log10(2) if any(len(ring) > MACROCYCLE_SIZE for ring in g.ring_systems) else 0.0
    return size + math.log10(spiro + 1) + math.log10(bridgeheads + 1) + macrocycle


def score_components(g: MolGraph, table: FragmentScoreTable) -> Tuple[float, float, float]:
    """Fragment score, complexity penalty and symmetry correction before rescaling."""
    fragments = circular_fragments(g)
    total = sum(fragments.values())
    fragment_score = (
        sum(table.contribution(f) * count for f, count in fragments.items()) / total if total else table.unknown
    )
    n_atoms = heavy_atom_count(g)
    symmetry = 0.5 * math.log(n_atoms / len(fragments)) if fragments and n_atoms > len(fragments) else 0.0
    return fragment_score, complexity_penalty(g), symmetry


def sa_score(g: MolGraph, table: Optional[FragmentScoreTable]) -> float:
    """
    Synthetic accessibility score in [1, 10], lower is easier.

    Args:
        g: Valid graph, neutralized by the caller when needed
        table: Fragment contributions

    Returns:
        Rescaled score

    Raises:
        DataError: If no table is given or the graph has no heavy atoms
    """
    if table is None:
        raise DataError("SA score needs a fragment score table")
    if heavy_atom_count(g) == 0:
        raise DataError("SA score needs at least one heavy atom")
    fragment_score, penalty, symmetry = score_components(g, table)
    raw = fragment_score - penalty + symmetry
    low, high = CONTRIBUTION_RANGE
    score = 11.0 - (raw - low + 1.0) / (high - low) * 9.0
    if score > 8.0:
        score = 8.0 + math.log(score + 1.0 - 9.0)
    return min(10.0, max(1.0, score))
