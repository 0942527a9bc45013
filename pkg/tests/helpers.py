"""Test doubles and oracles shared by the test modules."""

from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from src.encoding import TokenVocab
from src.models.molecule import MolGraph
from src.network.optim import Optimizer


class ScriptedModel:
    """
    Step model that emits a fixed string and then the end character, with probability one.

    Every row of a batch follows the same script.
    """

    def __init__(self, vocab: TokenVocab, script: str):
        self.vocab = vocab
        self.vocab_size = vocab.size
        self.indices = [vocab.char_to_index[c] for c in script] + [vocab.end_index]

    def initial_state(self, batch: Optional[int] = None) -> int:
        return 0

    def step(self, x: np.ndarray, state: int):
        index = self.indices[min(state, len(self.indices) - 1)]
        probs = np.zeros(x.shape)
        probs[..., index] = 1.0
        return probs, state + 1


class UniformModel:
    """Step model that returns the uniform distribution at every step."""

    def __init__(self, vocab: TokenVocab):
        self.vocab_size = vocab.size

    def initial_state(self, batch: Optional[int] = None) -> int:
        return 0

    def step(self, x: np.ndarray, state: int):
        return np.full(x.shape, 1.0 / self.vocab_size), state + 1


class FrozenOptimizer(Optimizer):
    """Optimizer that never moves the parameters."""

    name = "frozen"

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        pass


def numerical_gradient(
    loss: Callable[[], float], array: np.ndarray, indices: Iterable[tuple], eps: float = 1e-5
) -> Dict[tuple, float]:
    """
    Central differences of ``loss`` with respect to selected entries of ``array``.

    ``array`` is perturbed in place and restored.
    """
    grads = {}
    for index in indices:
        original = array[index]
        array[index] = original + eps
        plus = loss()
        array[index] = original - eps
        minus = loss()
        array[index] = original
        grads[index] = (plus - minus) / (2 * eps)
    return grads


def gradient_mismatches(
    analytic: np.ndarray, numeric: Dict[tuple, float], rtol: float = 1e-4, atol: float = 1e-8
) -> List[str]:
    """Entries whose analytic and numeric gradients disagree."""
    bad = []
    for index, value in numeric.items():
        a = analytic[index]
        if abs(a - value) > rtol * max(abs(a), abs(value)) + atol:
            bad.append(f"{index}: analytic {a:.3e} numeric {value:.3e}")
    return bad


def isomorphic(a: MolGraph, b: MolGraph) -> bool:
    """Brute-force molecular graph isomorphism on element, charge, aromaticity, H count and bond order."""

    def node_match(x, y):
        return all(x[k] == y[k] for k in ("element", "charge", "aromatic", "hcount", "isotope"))

    return nx.is_isomorphic(
        a.to_networkx(),
        b.to_networkx(),
        node_match=node_match,
        edge_match=lambda x, y: x["order"] == y["order"],
    )


def write_lines(path: Path, lines: Iterable[str]) -> Path:
    path = Path(path)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def simple_cycles(g: MolGraph) -> List[Tuple[FrozenSet[int], FrozenSet[FrozenSet[int]]]]:
    """
    Every simple cycle of a small graph as (atom set, bond set), by exhaustive search.

    Each cycle is grown from its lowest atom index, so it is found twice (once per
    direction) and deduplicated by its bond set.
    """
    neighbors: Dict[int, List[int]] = {i: [] for i in range(g.num_atoms)}
    for bond in g.bonds:
        neighbors[bond.begin].append(bond.end)
        neighbors[bond.end].append(bond.begin)
    found = {}

    def extend(path: List[int]) -> None:
        start, last = path[0], path[-1]
        for nxt in neighbors[last]:
            if nxt == start and len(path) >= 3:
                edges = frozenset(frozenset(pair) for pair in zip(path, path[1:] + [start]))
                found[edges] = frozenset(path)
            elif nxt > start and nxt not in path:
                extend(path + [nxt])

    for start in neighbors:
        extend([start])
    return [(atoms, edges) for edges, atoms in found.items()]
