"""SMILES tokenizer, parser, canonical writer and validator."""

import logging
import re
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError

from src.chem.canon import canonical_ranks
from src.chem.graph import (
    assign_implicit_hydrogens,
    bond_valence,
    check_aromaticity,
    check_valence,
    organic_implicit_h,
    perceive_rings,
)
from src.models.molecule import Atom, Bond, BondOrder, MolGraph
from src.models.records import ParseError, ParseErrorClass

logger = logging.getLogger(__name__)

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_SUBSET = ("b", "c", "n", "o", "p", "s")

TOKEN_PATTERN = re.compile(
    r"""
    (?P<bracket_atom>\[[^\[\]]*\])
    |(?P<atom>Cl|Br|[BCNOPSFI]|[bcnops])
    |(?P<bond>[-=\#:/\\])
    |(?P<branch_open>\()
    |(?P<branch_close>\))
    |(?P<ring_bond_twodigit>%\d\d)
    |(?P<ring_bond_digit>\d)
    |(?P<dot>\.)
    """,
    re.VERBOSE,
)

BRACKET_PATTERN = re.compile(
    r"^\[(?P<isotope>\d+)?"
    r"(?P<element>Cl|Br|[BCNOPSFIH]|[bcnops])"
    r"(?P<chirality>@@?)?"
    r"(?P<hcount>H\d?)?"
    r"(?P<charge>\+\+|--|[+-]\d?)?"
    r"(?::\d+)?\]$"
)

BOND_SYMBOLS: Dict[str, BondOrder] = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}


class TokenKind(str, Enum):
    ATOM = "atom"
    BRACKET_ATOM = "bracket_atom"
    BOND = "bond"
    BRANCH_OPEN = "branch_open"
    BRANCH_CLOSE = "branch_close"
    RING_BOND_DIGIT = "ring_bond_digit"
    RING_BOND_TWODIGIT = "ring_bond_twodigit"
    DOT = "dot"


class Token(BaseModel):
    """One lexical unit of a SMILES string."""

    kind: TokenKind = Field(description="Token category")
    text: str = Field(min_length=1, description="Source characters")
    position: int = Field(default=0, ge=0, description="Offset of the first character")


class SmilesError(ValueError):
    """Raised by tokenize/parse on malformed input."""

    def __init__(self, error_class: ParseErrorClass, position: int, message: str):
        self.error_class = error_class
        self.position = position
        super().__init__(f"{error_class.value} at {position}: {message}")
        self.detail = message

    def to_model(self) -> ParseError:
        return ParseError(position=self.position, error_class=self.error_class, message=self.detail)


class ValidationResult(BaseModel):
    """Outcome of ``validate``: valid with the parsed graph, or invalid with the error."""

    model_config = {"arbitrary_types_allowed": True}

    smiles: str = Field(description="Input string")
    valid: bool = Field(description="Parse and valence check succeeded")
    error: Optional[ParseError] = Field(default=None, description="Failure when invalid")
    graph: Optional[MolGraph] = Field(default=None, description="Parsed graph when valid")


def tokenize(s: str) -> List[Token]:
    """
    Split a SMILES string into tokens.

    Two-letter elements (Cl, Br) are single tokens; bracket atoms are validated here.

    Args:
        s: SMILES string

    Returns:
        Tokens whose texts concatenate back to ``s``

    Raises:
        SmilesError: lexical error on characters outside the supported alphabet
    """
    tokens = []
    position = 0
    while position < len(s):
        match = TOKEN_PATTERN.match(s, position)
        if match is None:
            raise SmilesError(ParseErrorClass.LEXICAL, position, f"unexpected character {s[position]!r}")
        kind = TokenKind(match.lastgroup)
        text = match.group()
        if kind == TokenKind.BRACKET_ATOM:
            try:
                _parse_bracket(text, position)
            except ValidationError as exc:
                raise SmilesError(ParseErrorClass.LEXICAL, position, f"invalid bracket atom {text}") from exc
        tokens.append(Token(kind=kind, text=text, position=position))
        position = match.end()
    return tokens


def _parse_bracket(text: str, position: int) -> Atom:
    match = BRACKET_PATTERN.match(text)
    if match is None:
        raise SmilesError(ParseErrorClass.LEXICAL, position, f"malformed bracket atom {text}")
    symbol = match.group("element")
    aromatic = symbol in AROMATIC_SUBSET
    element = symbol.capitalize() if aromatic else symbol
    hcount = match.group("hcount")
    hydrogens = 0 if hcount is None else (1 if hcount == "H" else int(hcount[1:]))
    charge = _parse_charge(match.group("charge"))
    if element == "H" and hydrogens:
        raise SmilesError(ParseErrorClass.LEXICAL, position, "hydrogen atom with hydrogens")
    if not -2 <= charge <= 2:
        raise SmilesError(ParseErrorClass.LEXICAL, position, f"charge {charge:+d} out of range")
    isotope = match.group("isotope")
    return Atom(
        element=element,
        formal_charge=charge,
        is_aromatic=aromatic,
        explicit_h=hydrogens,
        isotope=int(isotope) if isotope else None,
        bracket=True,
    )


def _parse_charge(text: Optional[str]) -> int:
    if not text:
        return 0
    sign = 1 if text[0] == "+" else -1
    if text in ("++", "--"):
        return 2 * sign
    return sign * (int(text[1:]) if len(text) > 1 else 1)


def _organic_atom(text: str) -> Atom:
    aromatic = text in AROMATIC_SUBSET
    return Atom(element=text.upper() if aromatic else text, is_aromatic=aromatic)


def _build_graph(s: str) -> Tuple[MolGraph, List[int], set]:
    tokens = tokenize(s)
    atoms: List[Atom] = []
    positions: List[int] = []
    bonds: Dict[frozenset, Tuple[int, int, BondOrder]] = {}
    implicit_pairs = set()
    branches: List[Tuple[int, int]] = []
    open_rings: Dict[str, Tuple[int, Optional[str], int]] = {}
    previous: Optional[int] = None
    pending: Optional[Token] = None

    def add_bond(a: int, b: int, symbol: Optional[str], where: int) -> None:
        key = frozenset((a, b))
        if a == b:
            raise SmilesError(ParseErrorClass.OTHER, where, "ring closure onto the same atom")
        if key in bonds:
            raise SmilesError(ParseErrorClass.OTHER, where, "duplicate bond")
        if symbol is None:
            both_aromatic = atoms[a].is_aromatic and atoms[b].is_aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
            implicit_pairs.add(key)
        else:
            order = BOND_SYMBOLS[symbol]
        bonds[key] = (a, b, order)

    for token in tokens:
        kind = token.kind
        if kind in (TokenKind.ATOM, TokenKind.BRACKET_ATOM):
            try:
                atom = _parse_bracket(token.text, token.position) if kind == TokenKind.BRACKET_ATOM else _organic_atom(token.text)
            except ValidationError as exc:
                raise SmilesError(ParseErrorClass.LEXICAL, token.position, str(exc)) from exc
            atoms.append(atom)
            positions.append(token.position)
            index = len(atoms) - 1
            if previous is not None:
                add_bond(previous, index, pending.text if pending else None, token.position)
            previous = index
            pending = None
        elif kind == TokenKind.BOND:
            if previous is None or pending is not None:
                raise SmilesError(ParseErrorClass.OTHER, token.position, "bond without a preceding atom")
            pending = token
        elif kind == TokenKind.BRANCH_OPEN:
            if previous is None or pending is not None:
                raise SmilesError(ParseErrorClass.OTHER, token.position, "branch without a preceding atom")
            branches.append((previous, token.position))
        elif kind == TokenKind.BRANCH_CLOSE:
            if not branches:
                raise SmilesError(ParseErrorClass.UNCLOSED_PARENTHESIS, token.position, "unbalanced ')'")
            if pending is not None:
                raise SmilesError(ParseErrorClass.OTHER, token.position, "dangling bond before ')'")
            previous, _ = branches.pop()
        elif kind in (TokenKind.RING_BOND_DIGIT, TokenKind.RING_BOND_TWODIGIT):
            if previous is None:
                raise SmilesError(ParseErrorClass.OTHER, token.position, "ring bond without an atom")
            label = token.text.lstrip("%")
            symbol = pending.text if pending else None
            if label in open_rings:
                partner, opened_symbol, _ = open_rings.pop(label)
                if symbol and opened_symbol and BOND_SYMBOLS[symbol] != BOND_SYMBOLS[opened_symbol]:
                    raise SmilesError(ParseErrorClass.OTHER, token.position, "conflicting ring bond orders")
                add_bond(partner, previous, symbol or opened_symbol, token.position)
            else:
                open_rings[label] = (previous, symbol, token.position)
            pending = None
        elif kind == TokenKind.DOT:
            if pending is not None or previous is None:
                raise SmilesError(ParseErrorClass.OTHER, token.position, "misplaced '.'")
            previous = None

    if pending is not None:
        raise SmilesError(ParseErrorClass.OTHER, pending.position, "dangling bond at end of input")
    if branches:
        raise SmilesError(ParseErrorClass.UNCLOSED_PARENTHESIS, branches[-1][1], "missing ')'")
    if open_rings:
        position = min(p for _, _, p in open_rings.values())
        raise SmilesError(ParseErrorClass.UNMATCHED_RING_CLOSURE, position, "ring bond opened but never closed")
    if not atoms:
        raise SmilesError(ParseErrorClass.OTHER, 0, "empty SMILES")
    if tokens[-1].kind == TokenKind.DOT:
        raise SmilesError(ParseErrorClass.OTHER, tokens[-1].position, "trailing '.'")

    bond_models = tuple(Bond(begin=a, end=b, order=order) for a, b, order in bonds.values())
    return MolGraph(atoms=tuple(atoms), bonds=bond_models), positions, implicit_pairs


def parse(s: str) -> MolGraph:
    """
    Parse a SMILES string into a sanitized MolGraph.

    Branches, ring closures (single digit and ``%nn``), bond symbols and bracket atoms
    with isotope, hydrogen count and charge are supported; stereo marks are read and
    dropped. An implicit bond between two aromatic atoms that ends up outside any ring
    becomes a single bond.

    Args:
        s: SMILES string

    Returns:
        MolGraph with rings perceived and implicit hydrogens assigned

    Raises:
        SmilesError: with the failure class and character offset
    """
    s = s.strip()
    if not s:
        raise SmilesError(ParseErrorClass.OTHER, 0, "empty SMILES")
    graph, positions, implicit_pairs = _build_graph(s)
    graph = perceive_rings(graph)

    demoted = tuple(
        bond.model_copy(update={"order": BondOrder.SINGLE})
        if bond.order == BondOrder.AROMATIC and not bond.in_ring and frozenset(bond.endpoints) in implicit_pairs
        else bond
        for bond in graph.bonds
    )
    graph = graph.model_copy(update={"bonds": demoted})

    violations = check_valence(graph)
    if violations:
        first = violations[0]
        raise SmilesError(ParseErrorClass.BAD_VALENCE, positions[first.atom_index], first.reason)
    problems = check_aromaticity(graph)
    if problems:
        first = problems[0]
        raise SmilesError(ParseErrorClass.OTHER, positions[first.atom_index], first.reason)
    return assign_implicit_hydrogens(graph)


def validate(s: str) -> ValidationResult:
    """
    Classify a SMILES string as valid or invalid without raising.

    Args:
        s: SMILES string

    Returns:
        ValidationResult with the parsed graph or the ParseError
    """
    try:
        graph = parse(s)
    except SmilesError as exc:
        return ValidationResult(smiles=s, valid=False, error=exc.to_model())
    except Exception as exc:  # noqa: BLE001
        logger.debug("Unexpected failure validating %r: %s", s, exc)
        return ValidationResult(
            smiles=s, valid=False, error=ParseError(position=0, error_class=ParseErrorClass.OTHER, message=str(exc))
        )
    return ValidationResult(smiles=s, valid=True, graph=graph)


def _format_atom(g: MolGraph, index: int, adj) -> str:
    atom = g.atoms[index]
    symbol = atom.element.lower() if atom.is_aromatic else atom.element
    if atom.element in ORGANIC_SUBSET and atom.formal_charge == 0 and atom.isotope is None:
        bonds, aromatic = bond_valence(index, adj)
        organic = Atom(element=atom.element, is_aromatic=atom.is_aromatic)
        if organic_implicit_h(organic, bonds, aromatic) == atom.total_h:
            return symbol
    text = "[" + (str(atom.isotope) if atom.isotope is not None else "") + symbol
    if atom.total_h:
        text += "H" + (str(atom.total_h) if atom.total_h > 1 else "")
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        text += sign + (str(abs(atom.formal_charge)) if abs(atom.formal_charge) > 1 else "")
    return text + "]"


def _bond_symbol(g: MolGraph, bond: Bond) -> str:
    if bond.order == BondOrder.DOUBLE:
        return "="
    if bond.order == BondOrder.TRIPLE:
        return "#"
    if bond.order == BondOrder.SINGLE and all(g.atoms[i].is_aromatic for i in bond.endpoints):
        return "-"
    return ""


def _ring_label(digit: int) -> str:
    return str(digit) if digit < 10 else f"%{digit}"


def write_canonical(g: MolGraph) -> str:
    """
    Write a canonical SMILES string.

    Components are emitted in order of their lowest-ranked atom, each as a depth-first
    walk that starts at that atom and visits neighbors by canonical rank. Ring closures
    take the lowest free label.

    Args:
        g: Valid MolGraph with hydrogens assigned

    Returns:
        Deterministic SMILES; isomorphic graphs give identical strings
    """
    if g.num_atoms == 0:
        return ""
    ranks = canonical_ranks(g)
    adj = g.adjacency()
    ordered_adj = [sorted(neighbors, key=lambda item: ranks[item[0]]) for neighbors in adj]

    visited = [False] * g.num_atoms
    children: List[List[Tuple[int, Bond]]] = [[] for _ in g.atoms]
    closures: List[List[Tuple[int, Bond]]] = [[] for _ in g.atoms]
    seen_bonds = set()

    def walk(index: int) -> None:
        visited[index] = True
        for neighbor, bond in ordered_adj[index]:
            key = frozenset(bond.endpoints)
            if key in seen_bonds:
                continue
            seen_bonds.add(key)
            if visited[neighbor]:
                closures[neighbor].append((index, bond))
                closures[index].append((neighbor, bond))
            else:
                children[index].append((neighbor, bond))
                walk(neighbor)

    roots = []
    for start in sorted(range(g.num_atoms), key=lambda i: ranks[i]):
        if not visited[start]:
            roots.append(start)
            walk(start)

    open_labels: Dict[frozenset, int] = {}
    closed = set()
    free: List[int] = []
    next_label = [1]

    def take_label() -> int:
        if free:
            free.sort()
            return free.pop(0)
        label = next_label[0]
        next_label[0] += 1
        return label

    def emit(index: int) -> str:
        parts = [_format_atom(g, index, adj)]
        ring_bonds = sorted(closures[index], key=lambda item: ranks[item[0]])
        released = []
        for _, bond in ring_bonds:
            key = frozenset(bond.endpoints)
            if key in open_labels:
                label = open_labels.pop(key)
                closed.add(key)
                parts.append(_bond_symbol(g, bond) + _ring_label(label))
                released.append(label)
        for _, bond in ring_bonds:
            key = frozenset(bond.endpoints)
            if key not in open_labels and key not in closed:
                label = take_label()
                open_labels[key] = label
                parts.append(_ring_label(label))
        free.extend(released)
        for position, (child, bond) in enumerate(children[index]):
            branch = _bond_symbol(g, bond) + emit(child)
            parts.append(branch if position == len(children[index]) - 1 else f"({branch})")
        return "".join(parts)

    return ".".join(emit(root) for root in roots)


def canonicalize(s: str) -> Optional[str]:
    """Canonical SMILES of a string, or None when it does not parse."""
    outcome = validate(s)
    return write_canonical(outcome.graph) if outcome.valid else None

