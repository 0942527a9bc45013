"""Evaluation of generated molecules: novelty, temperature sweep, property histograms and SA picks."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from scipy.stats import binomtest, ks_2samp
from tqdm import tqdm

from src.chem.descriptors import compute_descriptors
from src.chem.sascore import FragmentScoreTable
from src.chem.smiles import canonicalize, validate
from src.config import SamplerConfig
from src.encoding import TokenVocab
from src.errors import DataError
from src.models.records import HistogramSpec, NoveltyReport, PercentilePick
from src.sampling import StepModel, generate_batch

logger = logging.getLogger(__name__)

PROPERTIES = ("mw", "logp", "tpsa", "hba", "hbd", "rot_bonds", "sa_score")
DEFAULT_PERCENTILES = (5.0, 50.0, 95.0)


def read_smiles(path: Path) -> List[str]:
    """
    First whitespace-separated field of every non-empty line.

    Raises:
        DataError: If the file cannot be read
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"Cannot read {path}: {exc}") from exc
    return [line.split()[0] for line in text.splitlines() if line.strip()]


def sample_lines(path: Path, n: int, seed: int = 0) -> List[str]:
    """Draw ``n`` lines without replacement; all lines when the file is shorter."""
    lines = read_smiles(path)
    if n >= len(lines):
        return lines
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(lines), size=n, replace=False))
    return [lines[i] for i in picked]


def canonical_set(smiles: Sequence[str], workers: int = 1, progress: bool = False) -> Tuple[Set[str], int]:
    """
    Canonicalize a list of SMILES.

    Returns:
        (distinct canonical SMILES, number of lines that parsed)
    """
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            canon = list(pool.map(canonicalize, smiles, chunksize=256))
    else:
        canon = [canonicalize(s) for s in tqdm(smiles, desc="Canonicalizing", disable=not progress)]
    parsed = [c for c in canon if c is not None]
    return set(parsed), len(parsed)


def novelty(generated: Path, training: Path, workers: int = 1, progress: bool = False) -> NoveltyReport:
    """
    Intersect generated molecules with a training set after canonicalizing both.

    Args:
        generated: Generated SMILES file
        training: Training SMILES file
        workers: Processes used for canonicalization

    Returns:
        NoveltyReport; novel_fraction is 1 - found / valid over distinct molecules
    """
    generated_lines = read_smiles(generated)
    generated_set, valid_lines = canonical_set(generated_lines, workers, progress)
    training_set, _ = canonical_set(read_smiles(training), workers, progress)
    found = len(generated_set & training_set)
    valid_count = len(generated_set)
    report = NoveltyReport(
        generated_count=len(generated_lines),
        valid_lines=valid_lines,
        valid_count=valid_count,
        found_in_training=found,
        novel_fraction=1.0 - found / valid_count if valid_count else 0.0,
    )
    logger.info("%d of %d distinct valid molecules found in training", found, valid_count)
    return report


def temperature_sweep(
    model: StepModel,
    vocab: TokenVocab,
    temperatures: Sequence[float],
    n: int,
    seed: int = 0,
    max_len: Optional[int] = None,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Malformed fraction per sampling temperature with Wilson 95% intervals.

    Each temperature draws ``n`` fresh molecules from its own child seed.

    Raises:
        ValueError: If ``n`` is not positive or no temperature is given
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if not temperatures:
        raise ValueError("at least one temperature is required")
    children = np.random.SeedSequence(seed).spawn(len(temperatures))
    rows = []
    for temperature, child in zip(temperatures, children):
        config = SamplerConfig(
            temperature=temperature,
            max_len=max_len,
            seed=int(child.generate_state(1)[0]),
            count=n,
        )
        _, summary = generate_batch(model, vocab, config, progress=progress)
        malformed = summary.count - summary.valid_count
        interval = binomtest(malformed, n).proportion_ci(confidence_level=0.95, method="wilson")
        rows.append(
            {
                "temperature": temperature,
                "n": n,
                "malformed": malformed,
                "malformed_fraction": malformed / n,
                "ci_low": interval.low,
                "ci_high": interval.high,
                "unique_fraction": summary.unique_fraction,
            }
        )
    return pd.DataFrame(rows)


def descriptor_values(
    smiles: Iterable[str],
    properties: Sequence[str],
    fragment_table: Optional[FragmentScoreTable] = None,
    progress: bool = False,
) -> Tuple[Dict[str, List[float]], int]:
    """
    Property values of every parseable line.

    Returns:
        (values per property, number of skipped invalid lines)

    Raises:
        DataError: For an unknown property, or sa_score without a fragment table
    """
    unknown = [p for p in properties if p not in PROPERTIES]
    if unknown:
        raise DataError(f"Unknown properties: {', '.join(unknown)}")
    if "sa_score" in properties and fragment_table is None:
        raise DataError("sa_score needs a fragment table")
    values: Dict[str, List[float]] = {p: [] for p in properties}
    skipped = 0
    for s in tqdm(smiles, desc="Descriptors", disable=not progress):
        outcome = validate(s)
        if not outcome.valid:
            skipped += 1
            continue
        try:
            record = compute_descriptors(outcome.graph, fragment_table if "sa_score" in properties else None, s)
        except DataError:
            skipped += 1
            continue
        for prop in properties:
            values[prop].append(float(getattr(record, prop)))
    return values, skipped


def ks_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic; 0.0 when either side is empty."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return float(ks_2samp(a, b).statistic)


def property_histograms(
    datasets: Mapping[str, Sequence[str]],
    properties: Sequence[str] = PROPERTIES[:-1],
    bins: int = 30,
    fragment_table: Optional[FragmentScoreTable] = None,
    progress: bool = False,
) -> List[HistogramSpec]:
    """
    Histogram every property over every labeled dataset on shared bin edges.

    Args:
        datasets: Label to SMILES lines
        properties: Descriptor names from PROPERTIES
        bins: Number of bins
        fragment_table: Needed for sa_score

    Returns:
        One HistogramSpec per property with the KS distance of every label pair
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    per_label: Dict[str, Dict[str, List[float]]] = {}
    skipped: Dict[str, int] = {}
    for label, smiles in datasets.items():
        per_label[label], skipped[label] = descriptor_values(smiles, properties, fragment_table, progress)
        if skipped[label]:
            logger.warning("%s: skipped %d invalid lines", label, skipped[label])
    specs = []
    for prop in properties:
        pooled = np.concatenate([np.asarray(per_label[label][prop], dtype=float) for label in datasets])
        if pooled.size == 0:
            raise DataError(f"No valid molecules to histogram {prop}")
        low, high = float(pooled.min()), float(pooled.max())
        if high <= low:
            low, high = low - 0.5, high + 0.5
        edges = np.histogram_bin_edges(pooled, bins=bins, range=(low, high))
        counts = {
            label: np.histogram(per_label[label][prop], bins=edges)[0].astype(int).tolist() for label in datasets
        }
        ks = {
            f"{a}|{b}": ks_distance(per_label[a][prop], per_label[b][prop]) for a, b in combinations(datasets, 2)
        }
        specs.append(HistogramSpec(property=prop, edges=edges.tolist(), counts=counts, skipped=skipped, ks=ks))
    return specs


def histograms_frame(specs: Sequence[HistogramSpec]) -> pd.DataFrame:
    """Long-format table: one row per property, label and bin."""
    rows = []
    for spec in specs:
        for label, counts in spec.counts.items():
            for i, count in enumerate(counts):
                rows.append(
                    {
                        "property": spec.property,
                        "label": label,
                        "bin_low": spec.edges[i],
                        "bin_high": spec.edges[i + 1],
                        "count": count,
                    }
                )
    return pd.DataFrame(rows, columns=["property", "label", "bin_low", "bin_high", "count"])


def ks_frame(specs: Sequence[HistogramSpec]) -> pd.DataFrame:
    rows = [
        {"property": spec.property, "label_a": pair.split("|")[0], "label_b": pair.split("|")[1], "ks": value}
        for spec in specs
        for pair, value in spec.ks.items()
    ]
    return pd.DataFrame(rows, columns=["property", "label_a", "label_b", "ks"])


def nearest_rank(sorted_scores: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile of an ascending sequence."""
    rank = max(1, math.ceil(percentile / 100.0 * len(sorted_scores)))
    return sorted_scores[rank - 1]


def sa_percentile_pick(
    scored: Mapping[str, float],
    percentiles: Sequence[float] = DEFAULT_PERCENTILES,
    k: int = 10,
    training: Optional[Set[str]] = None,
) -> Tuple[List[PercentilePick], Optional[Tuple[str, float]]]:
    """
    The ``k`` compounds nearest each percentile of the SA score distribution.

    Candidates present in ``training`` are discarded first. Ties in distance are
    broken by canonical SMILES.

    Args:
        scored: Canonical SMILES to SA score
        percentiles: Percentiles in [0, 100]
        k: Compounds per percentile
        training: Canonical SMILES to exclude

    Returns:
        (one pick per percentile, highest scoring compound or None when nothing is left)
    """
    if k < 1:
        raise ValueError("k must be positive")
    training = training or set()
    candidates = sorted((s, score) for s, score in scored.items() if s not in training)
    if len(candidates) < k:
        logger.warning("Only %d novel compounds available, fewer than k=%d", len(candidates), k)
    if not candidates:
        return [PercentilePick(percentile=p, threshold=float("nan")) for p in percentiles], None
    ordered = sorted(score for _, score in candidates)
    picks = []
    for percentile in percentiles:
        threshold = nearest_rank(ordered, percentile)
        nearest = sorted(candidates, key=lambda item: (abs(item[1] - threshold), item[0]))[:k]
        picks.append(
            PercentilePick(
                percentile=percentile,
                threshold=threshold,
                smiles=[s for s, _ in nearest],
                scores=[score for _, score in nearest],
            )
        )
    top = max(candidates, key=lambda item: (item[1], item[0]))
    return picks, top


def picks_frame(picks: Sequence[PercentilePick], top: Optional[Tuple[str, float]]) -> pd.DataFrame:
    rows = [
        {"percentile": pick.percentile, "threshold": pick.threshold, "smiles": s, "sa_score": score}
        for pick in picks
        for s, score in zip(pick.smiles, pick.scores)
    ]
    if top is not None:
        rows.append({"percentile": "max", "threshold": top[1], "smiles": top[0], "sa_score": top[1]})
    return pd.DataFrame(rows, columns=["percentile", "threshold", "smiles", "sa_score"])
