"""Molecular property calculators: weight, logP, TPSA, H-bond counts, rotatable bonds."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from src.chem.sascore import FragmentScoreTable, sa_score
from src.errors import DataError, UnsupportedElementError
from src.models.molecule import Atom, Bond, BondOrder, MolGraph
from src.models.records import DescriptorRecord

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
CRIPPEN_TABLE_PATH = DATA_DIR / "crippen_contribs.txt"
TPSA_TABLE_PATH = DATA_DIR / "tpsa_contribs.txt"

ATOMIC_MASSES: Dict[str, float] = {
    "H": 1.008,
    "B": 10.812,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "F": 18.998,
    "P": 30.974,
    "S": 32.06,
    "Cl": 35.453,
    "Br": 79.904,
    "I": 126.904,
}

HETEROATOMS = ("N", "O", "P", "S", "F", "Cl", "Br", "I")
HALOGEN_AROMATIC_TYPES = {"F": "C14", "Cl": "C15", "Br": "C16", "I": "C17", "B": "C13"}
FALLBACK_TYPES = {"C": "CS", "N": "NS", "O": "OS", "H": "HS"}
BOND_SYMBOL_ORDER = {BondOrder.SINGLE: "-", BondOrder.DOUBLE: "=", BondOrder.TRIPLE: "#", BondOrder.AROMATIC: ":"}

# Fragment-like and drug-like subset rules of the source molecule collections.
FRAGMENT_RULES = {"logp_max": 3.5, "mw_max": 250.0, "rot_max": 5}
DRUG_RULES = {"mw_min": 150.0, "mw_max": 500.0, "logp_max": 5.0, "rot_max": 7, "tpsa_max": 150.0, "hbd_max": 5, "hba_max": 10}


class ContributionTable(BaseModel):
    """Versioned mapping of atom type or environment key to a contribution value."""

    name: str = Field(description="Table identifier from the header line")
    version: int = Field(ge=1, description="Format version from the header line")
    values: Dict[str, float] = Field(description="Contribution per key")

    def get(self, key: str) -> Optional[float]:
        return self.values.get(key)

    @classmethod
    def load(cls, path: Path) -> "ContributionTable":
        """
        Load a contribution table written as ``# <name> v<version>`` followed by
        tab-separated ``key value`` lines.

        Raises:
            DataError: If the file is missing or malformed
        """
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise DataError(f"Cannot read contribution table {path}: {exc}") from exc
        if not lines or not lines[0].startswith("# "):
            raise DataError(f"Contribution table {path} has no header")
        name, _, version = lines[0][2:].strip().rpartition(" v")
        if not name or not version.isdigit():
            raise DataError(f"Malformed header in {path}: {lines[0]!r}")
        values = {}
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            try:
                values[fields[0]] = float(fields[1])
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}:{number}: expected 'key<TAB>value'") from exc
        return cls(name=name, version=int(version), values=values)


@lru_cache(maxsize=None)
def crippen_table() -> ContributionTable:
    return ContributionTable.load(CRIPPEN_TABLE_PATH)


@lru_cache(maxsize=None)
def tpsa_table() -> ContributionTable:
    return ContributionTable.load(TPSA_TABLE_PATH)


def _require_atoms(g: MolGraph) -> None:
    if g.num_atoms == 0:
        raise DataError("Descriptors need at least one atom")


def hydrogen_count(g: MolGraph, index: int, adj) -> int:
    """Implicit, bracket and explicit-atom hydrogens on an atom."""
    return g.atoms[index].total_h + sum(1 for j, _ in adj[index] if g.atoms[j].element == "H")


def molecular_weight(g: MolGraph) -> float:
    """
    Average molecular weight from standard atomic masses.

    Args:
        g: Graph with implicit hydrogens resolved

    Returns:
        Weight in g/mol including every hydrogen

    Raises:
        DataError: For an empty graph
        UnsupportedElementError: For elements without a mass entry
    """
    _require_atoms(g)
    total = 0.0
    for index, atom in enumerate(g.atoms):
        if atom.element not in ATOMIC_MASSES:
            raise UnsupportedElementError(atom.element, index)
        total += ATOMIC_MASSES[atom.element] + atom.total_h * ATOMIC_MASSES["H"]
    return total


def hba(g: MolGraph) -> int:
    """Hydrogen bond acceptors as the count of N and O atoms."""
    return sum(1 for atom in g.atoms if atom.element in ("N", "O"))


def hbd(g: MolGraph) -> int:
    """Hydrogen bond donors as the number of N-H and O-H bonds."""
    adj = g.adjacency()
    return sum(hydrogen_count(g, i, adj) for i, atom in enumerate(g.atoms) if atom.element in ("N", "O"))


def _is_amide_bond(g: MolGraph, bond: Bond, adj) -> bool:
    for carbon, nitrogen in (bond.endpoints, bond.endpoints[::-1]):
        if g.atoms[carbon].element != "C" or g.atoms[nitrogen].element != "N":
            continue
        if any(b.order == BondOrder.DOUBLE and g.atoms[j].element == "O" for j, b in adj[carbon]):
            return True
    return False


def rotatable_bonds(g: MolGraph) -> int:
    """
    Count non-ring single bonds between two non-terminal heavy atoms.

    Amide C-N bonds are excluded. Rings must already be perceived.
    """
    adj = g.adjacency()
    count = 0
    for bond in g.bonds:
        if bond.order != BondOrder.SINGLE or bond.in_ring:
            continue
        a, b = bond.endpoints
        if not (g.atoms[a].is_heavy and g.atoms[b].is_heavy):
            continue
        if g.heavy_degree(a, adj) < 2 or g.heavy_degree(b, adj) < 2:
            continue
        if _is_amide_bond(g, bond, adj):
            continue
        count += 1
    return count


def _carbon_type(g: MolGraph, index: int, adj) -> str:
    atom = g.atoms[index]
    neighbors = [(j, b) for j, b in adj[index] if g.atoms[j].is_heavy]
    if atom.is_aromatic:
        if atom.total_h > 0:
            return "C18"
        exocyclic = [(j, b) for j, b in neighbors if b.order != BondOrder.AROMATIC]
        if not exocyclic:
            return "C19" if len(neighbors) == 3 else "CS"
        j, bond = exocyclic[0]
        other = g.atoms[j]
        if other.element in HALOGEN_AROMATIC_TYPES:
            return HALOGEN_AROMATIC_TYPES[other.element]
        if bond.order == BondOrder.DOUBLE:
            return "C25"
        if other.is_aromatic:
            return "C20"
        return {"C": "C21", "N": "C22", "O": "C23", "S": "C24"}.get(other.element, "CS")

    orders = [b.order for _, b in neighbors]
    if BondOrder.TRIPLE in orders:
        return "C7"
    doubles = [j for j, b in neighbors if b.order == BondOrder.DOUBLE]
    if doubles:
        if any(g.atoms[j].element != "C" for j in doubles):
            return "C5"
        return "C26" if any(g.atoms[j].is_aromatic for j, _ in neighbors) else "C6"
    degree = len(neighbors)
    if any(g.atoms[j].element == "B" for j, _ in neighbors):
        return "C27"
    aromatic = [j for j, _ in neighbors if g.atoms[j].is_aromatic]
    if aromatic:
        if degree == 1:
            return "C9" if g.atoms[aromatic[0]].element != "C" else "C8"
        return {2: "C10", 3: "C11"}.get(degree, "C12")
    if any(g.atoms[j].element in HETEROATOMS for j, _ in neighbors):
        return "C3" if degree <= 2 else "C4"
    return "C1" if degree <= 2 else "C2"


def _nitrogen_type(g: MolGraph, index: int, adj) -> str:
    atom = g.atoms[index]
    hydrogens = hydrogen_count(g, index, adj)
    neighbors = [(j, b) for j, b in adj[index] if g.atoms[j].is_heavy]
    orders = [b.order for _, b in neighbors]
    if atom.is_aromatic:
        return "N12" if atom.formal_charge > 0 else "N11"
    if atom.formal_charge > 0:
        if hydrogens:
            return "N10"
        return "N14" if BondOrder.TRIPLE in orders else "N13"
    if atom.formal_charge < 0:
        return "N14"
    if BondOrder.TRIPLE in orders:
        return "N9"
    if BondOrder.DOUBLE in orders:
        return "N5" if hydrogens else "N6"
    aromatic_neighbor = any(g.atoms[j].is_aromatic for j, _ in neighbors)
    if hydrogens == 2 and len(neighbors) == 1:
        return "N3" if aromatic_neighbor else "N1"
    if hydrogens == 1 and len(neighbors) == 2:
        return "N4" if aromatic_neighbor else "N2"
    if hydrogens == 0 and len(neighbors) == 3:
        return "N8" if aromatic_neighbor else "N7"
    return "NS"


def _carbonyl_partner_type(g: MolGraph, carbon: int, oxygen: int, adj) -> str:
    if g.atoms[carbon].is_aromatic:
        return "O8"
    others = [j for j, _ in adj[carbon] if j != oxygen and g.atoms[j].is_heavy]
    if sum(1 for j in others if g.atoms[j].element != "C") >= 2:
        return "O11"
    if any(g.atoms[j].is_aromatic for j in others):
        return "O10"
    return "O9"


def _oxygen_type(g: MolGraph, index: int, adj) -> str:
    atom = g.atoms[index]
    neighbors = [(j, b) for j, b in adj[index] if g.atoms[j].is_heavy]
    if atom.is_aromatic:
        return "O1"
    if atom.formal_charge < 0 and neighbors:
        partner = neighbors[0][0]
        element = g.atoms[partner].element
        if element == "N":
            return "O5"
        if element == "S":
            return "O6"
        if element == "C" and any(
            b.order == BondOrder.DOUBLE and g.atoms[j].element == "O" for j, b in adj[partner]
        ):
            return "O12"
        return "O7"
    doubles = [j for j, b in neighbors if b.order == BondOrder.DOUBLE]
    if doubles:
        partner = doubles[0]
        element = g.atoms[partner].element
        if element in ("N", "O"):
            return "O5"
        if element == "C":
            return _carbonyl_partner_type(g, partner, index, adj)
        return "OS"
    if hydrogen_count(g, index, adj) > 0:
        return "O2"
    if len(neighbors) == 2:
        return "O4" if any(g.atoms[j].is_aromatic for j, _ in neighbors) else "O3"
    return "OS"


def _hydrogen_type(g: MolGraph, host: int, adj) -> str:
    element = g.atoms[host].element
    if element in ("C", "H"):
        return "H1"
    if element == "N":
        return "H3"
    if element != "O":
        return "H2"
    for j, _ in adj[host]:
        other = g.atoms[j]
        if other.element == "N":
            return "H3"
        if other.element in ("O", "S"):
            return "H4"
        if other.element == "C" and not other.is_aromatic and any(
            b.order == BondOrder.DOUBLE for _, b in adj[j]
        ):
            return "H4"
    return "H2"


def crippen_type(g: MolGraph, index: int, adj=None) -> str:
    """
    Atom type of a heavy atom under the atom-contribution logP scheme.

    Returns the element's unmatched type (CS, NS, OS) when no rule applies and MS for
    elements the scheme does not type.
    """
    adj = adj if adj is not None else g.adjacency()
    atom = g.atoms[index]
    if atom.element == "C":
        return _carbon_type(g, index, adj)
    if atom.element == "N":
        return _nitrogen_type(g, index, adj)
    if atom.element == "O":
        return _oxygen_type(g, index, adj)
    if atom.element == "S":
        if atom.is_aromatic:
            return "S3"
        return "S2" if atom.formal_charge else "S1"
    if atom.element in ("F", "Cl", "Br", "I", "P"):
        return atom.element
    if atom.element == "H":
        neighbors = [j for j, _ in adj[index]]
        return _hydrogen_type(g, neighbors[0], adj) if neighbors else "HS"
    return "MS"


def logp(g: MolGraph, table: Optional[ContributionTable] = None) -> float:
    """
    Atom-contribution logP including hydrogen contributions.

    Args:
        g: Valid graph with hydrogens assigned
        table: Contribution table, defaults to the shipped one

    Returns:
        Sum of per-atom contributions
    """
    _require_atoms(g)
    table = table or crippen_table()
    adj = g.adjacency()
    total = 0.0
    for index, atom in enumerate(g.atoms):
        atom_type = crippen_type(g, index, adj)
        if atom_type in FALLBACK_TYPES.values() or atom_type == "MS":
            logger.warning("No logP atom type matches %s atom %d; using %s", atom.element, index, atom_type)
        total += table.values[atom_type]
        if atom.total_h and atom.element != "H":
            total += atom.total_h * table.values[_hydrogen_type(g, index, adj)]
    return total


def _in_three_ring(g: MolGraph, index: int) -> bool:
    return any(len(ring) == 3 and index in ring for ring in g.ring_systems)


def tpsa_key(g: MolGraph, index: int, adj) -> str:
    """Environment key of a polar atom: element, hydrogens, charge, sorted bond symbols."""
    atom = g.atoms[index]
    symbol = atom.element.lower() if atom.is_aromatic else atom.element
    heavy_bonds = [b for j, b in adj[index] if g.atoms[j].is_heavy]
    bonds = "".join(sorted((BOND_SYMBOL_ORDER[b.order] for b in heavy_bonds), key="-=#:".index))
    key = f"{symbol},{hydrogen_count(g, index, adj)},{atom.formal_charge},{bonds}"
    if _in_three_ring(g, index):
        key += ",r3"
    return key


def _tpsa_fallback(element: str, heavy: int, hydrogens: int) -> float:
    if element == "N":
        return max(0.0, 30.5 - 8.2 * heavy + 1.5 * hydrogens)
    return max(0.0, 28.5 - 8.6 * heavy + 1.5 * hydrogens)


def tpsa(g: MolGraph, table: Optional[ContributionTable] = None) -> float:
    """
    Topological polar surface area from N and O environment contributions.

    Sulfur and phosphorus are not counted. Three-ring variants fall back to the
    open-chain entry when the table has no specific one.
    """
    _require_atoms(g)
    table = table or tpsa_table()
    adj = g.adjacency()
    total = 0.0
    for index, atom in enumerate(g.atoms):
        if atom.element not in ("N", "O"):
            continue
        key = tpsa_key(g, index, adj)
        value = table.get(key)
        if value is None and key.endswith(",r3"):
            value = table.get(key[: -len(",r3")])
        if value is None:
            heavy = g.heavy_degree(index, adj)
            value = _tpsa_fallback(atom.element, heavy, hydrogen_count(g, index, adj))
            logger.debug("TPSA environment %s not tabulated; estimated %.2f", key, value)
        total += value
    return total


def neutralize(g: MolGraph) -> MolGraph:
    """
    Move charged atoms to a neutral protonation state where one exists.

    Cationic N carrying hydrogens loses one; anionic O, S and N not next to a cation
    gain one. Other charges are left in place with a warning.

    Args:
        g: Valid graph

    Returns:
        The same graph when nothing changes, otherwise a neutralized copy
    """
    adj = g.adjacency()
    atoms: List[Atom] = list(g.atoms)
    changed = False
    for index, atom in enumerate(g.atoms):
        if atom.formal_charge == 0:
            continue
        if atom.formal_charge == 1 and atom.element == "N" and atom.total_h > 0:
            atoms[index] = atom.model_copy(
                update={"formal_charge": 0, "explicit_h": atom.total_h - 1, "implicit_h": 0, "bracket": True}
            )
            changed = True
            continue
        next_to_cation = any(g.atoms[j].formal_charge > 0 for j, _ in adj[index])
        if atom.formal_charge == -1 and atom.element in ("O", "S", "N") and not next_to_cation:
            atoms[index] = atom.model_copy(
                update={"formal_charge": 0, "explicit_h": atom.total_h + 1, "implicit_h": 0, "bracket": True}
            )
            changed = True
            continue
        if not next_to_cation and not any(g.atoms[j].formal_charge < 0 for j, _ in adj[index]):
            logger.warning("Leaving charge %+d on %s atom %d", atom.formal_charge, atom.element, index)
    return g.replace_atoms(tuple(atoms)) if changed else g


def zinc_subset_flags(mw: float, logp_value: float, tpsa_value: float, hba_count: int, hbd_count: int, rot: int) -> Tuple[bool, bool]:
    """
    Fragment-like and drug-like membership under the source collections' rules.

    Returns:
        (fragment_like, drug_like)
    """
    fragment = (
        logp_value <= FRAGMENT_RULES["logp_max"]
        and mw <= FRAGMENT_RULES["mw_max"]
        and rot <= FRAGMENT_RULES["rot_max"]
    )
    drug = (
        DRUG_RULES["mw_min"] <= mw <= DRUG_RULES["mw_max"]
        and logp_value <= DRUG_RULES["logp_max"]
        and rot <= DRUG_RULES["rot_max"]
        and tpsa_value < DRUG_RULES["tpsa_max"]
        and hbd_count <= DRUG_RULES["hbd_max"]
        and hba_count <= DRUG_RULES["hba_max"]
    )
    return fragment, drug


def compute_descriptors(g: MolGraph, fragment_table: Optional[FragmentScoreTable] = None, smiles: str = "") -> DescriptorRecord:
    """
    All descriptors of one molecule.

    The SA score is computed on the neutralized graph and left empty without a
    fragment table.

    Args:
        g: Valid graph with rings perceived
        fragment_table: SA fragment contributions
        smiles: SMILES recorded on the result

    Returns:
        DescriptorRecord with the subset flags filled in
    """
    mw = molecular_weight(g)
    logp_value = logp(g)
    tpsa_value = tpsa(g)
    hba_count = hba(g)
    hbd_count = hbd(g)
    rot = rotatable_bonds(g)
    fragment_like, drug_like = zinc_subset_flags(mw, logp_value, tpsa_value, hba_count, hbd_count, rot)
    return DescriptorRecord(
        smiles=smiles,
        mw=mw,
        logp=logp_value,
        tpsa=tpsa_value,
        hba=hba_count,
        hbd=hbd_count,
        rot_bonds=rot,
        sa_score=sa_score(neutralize(g), fragment_table) if fragment_table is not None else None,
        fragment_like=fragment_like,
        drug_like=drug_like,
    )
