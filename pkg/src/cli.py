"""Command-line entry point wiring the preparation, training, sampling and analysis stages."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from src.analysis import (
    PROPERTIES,
    canonical_set,
    histograms_frame,
    ks_frame,
    novelty,
    picks_frame,
    property_histograms,
    read_smiles,
    sa_percentile_pick,
    sample_lines,
    temperature_sweep,
)
from src.chem.descriptors import compute_descriptors, neutralize
from src.chem.sascore import FragmentScoreTable, sa_score
from src.chem.smiles import validate, write_canonical
from src.config import PipelineConfig, load_config, seed_sequence
from src.encoding import TokenVocab
from src.errors import DataError, NumericalError, TrainingAborted
from src.network.checkpoint import load_checkpoint
from src.network.model import LstmModel
from src.pipeline.prepare_graph import CHUNK_DIR, VOCAB_FILE, prepare
from src.sampling import generate_batch, write_results
from src.training import DirectoryStream, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

# Order of the child seeds handed to each stage.
SEED_STREAMS = ("prepare", "init", "train", "sample", "analysis")

CONFIG_KEYS = ("seed", "log_level", "output_dir", "fragment_table")
SECTION_PREFIXES = ("model_", "train_", "sampler_")


class UsageError(Exception):
    """Bad command-line usage."""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def stream_seeds(seed: int) -> Dict[str, int]:
    """One integer seed per stage, all derived from the root seed."""
    children = seed_sequence(seed).spawn(len(SEED_STREAMS))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(SEED_STREAMS, children)}


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def progress_enabled() -> bool:
    return sys.stderr.isatty()


def _fragment_table(args: argparse.Namespace, config: PipelineConfig, required: bool) -> Optional[FragmentScoreTable]:
    path = getattr(args, "sa_table", None) or config.fragment_table
    if path is None:
        if required:
            raise UsageError("an SA fragment table is required (--sa-table or fragment_table in the config)")
        return None
    return FragmentScoreTable.load(path)


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)


def cmd_prepare(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    out_dir = Path(args.out) if args.out else config.output_dir / "prepared"
    print(f"Preparing corpus: {args.input}")
    print("-" * 50)
    report = prepare(args.input, out_dir, chunk_size=config.train.chunk_size, seed=seeds["prepare"])
    print("\n✓ Preparation complete!")
    print(f"  - Lines read: {report.lines_read}")
    print(f"  - Lines kept: {report.kept}")
    print(f"  - Lines dropped: {report.dropped}")
    print(f"  - Max length: {report.max_len}")
    print(f"  - Vocabulary size: {report.vocab_size}")
    print(f"  - Chunks: {report.chunks} (chunk 0 is the validation set)")
    print(f"  - Output: {out_dir}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    data_dir = Path(args.data)
    vocab = TokenVocab.load(args.vocab or data_dir / VOCAB_FILE)
    stream = DirectoryStream(data_dir / CHUNK_DIR, vocab)
    out_dir = Path(args.out) if args.out else config.output_dir / "checkpoints"
    optimizer = None
    if args.resume:
        model, saved_vocab, optimizer, _ = load_checkpoint(args.resume)
        if saved_vocab.digest != vocab.digest:
            raise DataError(f"{args.resume} was trained with a different vocabulary")
        if optimizer is not None and args.train_lr_init is not None:
            optimizer.learning_rate = config.train.lr_init
        print(f"Resuming from {args.resume}")
        if optimizer is not None:
            print(f"  - Learning rate: {optimizer.learning_rate:.2e}")
    else:
        model = LstmModel.initialize(vocab.size, config.model, seed=seeds["init"])
    train_config = config.train.model_copy(update={"seed": seeds["train"]})
    print(f"Training on {len(stream.paths) - 1} chunks from {data_dir}")
    print("-" * 50)
    try:
        _, history = train(model, stream, vocab, train_config, out_dir, optimizer, progress_enabled())
    except TrainingAborted as exc:
        print(f"\n✗ {exc}")
        print(f"  - Last good checkpoint: {exc.checkpoint or 'none'}")
        return EXIT_NUMERICAL
    print("\n✓ Training complete!")
    print(f"  - Chunks trained: {len(history.records)}")
    print(f"  - Baseline validation loss: {history.baseline_val_loss:.4f}")
    print(f"  - Best validation loss: {history.best_val_loss:.4f}")
    if history.records:
        print(f"  - Final learning rate: {history.records[-1].lr:.2e}")
    print(f"  - Checkpoints: {out_dir}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    model, vocab, _, _ = load_checkpoint(args.ckpt)
    sampler = config.sampler.model_copy(update={"seed": seeds["sample"]})
    results, summary = generate_batch(model, vocab, sampler, progress=progress_enabled())
    write_results(results, args.out, args.invalid_out)
    print(f"\n✓ Generated {summary.count} strings at temperature {sampler.temperature}")
    print(f"  - Valid: {summary.valid_count} ({summary.valid_fraction:.1%})")
    print(f"  - Unique among valid: {summary.unique_count} ({summary.unique_fraction:.1%})")
    for error_class, count in sorted(summary.error_classes.items()):
        print(f"  - Malformed ({error_class}): {count}")
    print(f"  - Output: {args.out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    rows = []
    for s in read_smiles(args.input):
        outcome = validate(s)
        rows.append(
            {
                "smiles": s,
                "status": "valid" if outcome.valid else "invalid",
                "error_class": outcome.error.error_class.value if outcome.error else "",
                "position": outcome.error.position if outcome.error else "",
                "canonical": write_canonical(outcome.graph) if outcome.valid else "",
            }
        )
    frame = pd.DataFrame(rows, columns=["smiles", "status", "error_class", "position", "canonical"])
    _write_frame(frame, args.out)
    valid = int((frame["status"] == "valid").sum())
    print(f"✓ Validated {len(frame)} lines: {valid} valid, {len(frame) - valid} invalid")
    print(f"  - Output: {args.out}")
    return EXIT_OK


def cmd_props(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    table = _fragment_table(args, config, required=False)
    records = []
    skipped = 0
    for s in read_smiles(args.input):
        outcome = validate(s)
        if not outcome.valid:
            skipped += 1
            continue
        try:
            records.append(compute_descriptors(outcome.graph, table, s).model_dump())
        except DataError as exc:
            logger.warning("Skipping %s: %s", s, exc)
            skipped += 1
    _write_frame(pd.DataFrame(records), args.out)
    print(f"✓ Descriptors for {len(records)} molecules ({skipped} invalid lines skipped)")
    if table is None:
        print("  - SA score left empty (no fragment table)")
    print(f"  - Output: {args.out}")
    return EXIT_OK


def cmd_novelty(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    report = novelty(args.generated, args.training, workers=args.workers, progress=progress_enabled())
    print("✓ Novelty")
    print(f"  - Generated lines: {report.generated_count}")
    print(f"  - Valid lines: {report.valid_lines}")
    print(f"  - Distinct valid molecules: {report.valid_count}")
    print(f"  - Found in training: {report.found_in_training}")
    print(f"  - Novel fraction: {report.novel_fraction:.3f}")
    if args.out:
        _write_frame(pd.DataFrame([report.model_dump()]), args.out)
        print(f"  - Output: {args.out}")
    return EXIT_OK


def cmd_temp_sweep(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    if args.n <= 0:
        raise UsageError("--n must be positive")
    model, vocab, _, _ = load_checkpoint(args.ckpt)
    frame = temperature_sweep(
        model, vocab, args.temps, args.n, seed=seeds["sample"], max_len=config.sampler.max_len, progress=progress_enabled()
    )
    _write_frame(frame, args.out)
    print(f"✓ Temperature sweep over {len(args.temps)} temperatures, {args.n} samples each")
    for row in frame.itertuples():
        print(f"  - T={row.temperature:g}: malformed {row.malformed_fraction:.3f} [{row.ci_low:.3f}, {row.ci_high:.3f}]")
    print(f"  - Output: {args.out}")
    return EXIT_OK


def _labeled_files(pairs: Sequence[str]) -> Dict[str, Path]:
    files = {}
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"--file expects LABEL=PATH, got {pair!r}")
        files[label] = Path(path)
    return files


def cmd_hist(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    files = _labeled_files(args.file)
    properties = [p.strip() for p in args.props.split(",") if p.strip()]
    table = _fragment_table(args, config, required="sa_score" in properties)
    datasets = {
        label: sample_lines(path, args.max_per_label, seeds["analysis"]) if args.max_per_label else read_smiles(path)
        for label, path in files.items()
    }
    specs = property_histograms(datasets, properties, args.bins, table, progress=progress_enabled())
    out = Path(args.out)
    ks_path = out.with_name(f"{out.stem}_ks.csv")
    _write_frame(histograms_frame(specs), out)
    _write_frame(ks_frame(specs), ks_path)
    print(f"✓ Histograms of {len(properties)} properties over {len(files)} datasets")
    for spec in specs:
        for pair, value in spec.ks.items():
            print(f"  - {spec.property} {pair.replace('|', ' vs ')}: KS {value:.3f}")
    for label, count in (specs[0].skipped if specs else {}).items():
        if count:
            print(f"  - {label}: {count} invalid lines skipped")
    print(f"  - Output: {out}, {ks_path}")
    return EXIT_OK


def cmd_sa_pick(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    table = _fragment_table(args, config, required=True)
    scored = {}
    for s in read_smiles(args.generated):
        outcome = validate(s)
        if not outcome.valid:
            continue
        canonical = write_canonical(outcome.graph)
        if canonical not in scored:
            try:
                scored[canonical] = sa_score(neutralize(outcome.graph), table)
            except DataError as exc:
                logger.warning("Skipping %s: %s", s, exc)
    training = canonical_set(read_smiles(args.training))[0] if args.training else set()
    picks, top = sa_percentile_pick(scored, args.percentiles, args.k, training)
    _write_frame(picks_frame(picks, top), args.out)
    print(f"✓ SA picks from {len(scored)} distinct valid molecules")
    for pick in picks:
        print(f"  - {pick.percentile:g}th percentile (SA {pick.threshold:.2f}): {len(pick.smiles)} compounds")
    if top is not None:
        print(f"  - Highest SA score: {top[0]} ({top[1]:.2f})")
    print(f"  - Output: {args.out}")
    return EXIT_OK


def cmd_build_sa_table(args: argparse.Namespace, config: PipelineConfig, seeds: Dict[str, int]) -> int:
    graphs = []
    skipped = 0
    for s in read_smiles(args.input):
        outcome = validate(s)
        if outcome.valid:
            graphs.append(neutralize(outcome.graph))
        else:
            skipped += 1
    table = FragmentScoreTable.from_corpus(graphs, progress=progress_enabled())
    table.save(args.out)
    print(f"✓ Fragment table from {table.n_molecules} molecules ({skipped} invalid lines skipped)")
    print(f"  - Fragments: {len(table.contributions)}")
    print(f"  - Output: {args.out}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, PipelineConfig, Dict[str, int]], int]] = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "sample": cmd_sample,
    "validate": cmd_validate,
    "props": cmd_props,
    "novelty": cmd_novelty,
    "temp-sweep": cmd_temp_sweep,
    "hist": cmd_hist,
    "sa-pick": cmd_sa_pick,
    "build-sa-table": cmd_build_sa_table,
}


def _add_seed(parser: argparse.ArgumentParser) -> None:
    # Absent unless given, so a --seed before the subcommand still applies
    parser.add_argument("--seed", type=int, dest="seed", default=argparse.SUPPRESS, help="Root seed of every random stream")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="smiles-rnn", description="Generate molecules with a character-level LSTM over SMILES")
    parser.add_argument("--config", type=Path, help="Flat key=value config file")
    parser.add_argument("--seed", type=int, dest="seed", help="Root seed of every random stream")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--output-dir", type=Path, dest="output_dir", help="Default directory for outputs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("prepare", help="Shuffle, build the vocabulary and write one-hot chunks")
    p.add_argument("input", type=Path, help="Raw SMILES file, one per line")
    p.add_argument("--out", type=Path, help="Output directory")
    p.add_argument("--chunk-size", type=int, dest="train_chunk_size")
    _add_seed(p)

    p = sub.add_parser("train", help="Train the network on prepared chunks")
    p.add_argument("--data", type=Path, required=True, help="Directory written by prepare")
    p.add_argument("--vocab", type=Path, help="Vocabulary file, defaults to the one in --data")
    p.add_argument("--out", type=Path, help="Checkpoint directory")
    p.add_argument("--resume", type=Path, help="Checkpoint to continue from")
    p.add_argument("--batch-size", "--batch", type=int, dest="train_batch_size")
    p.add_argument("--lr", type=float, dest="train_lr_init")
    p.add_argument("--max-chunks", type=int, dest="train_max_chunks")
    p.add_argument("--passes", type=int, dest="train_passes")
    p.add_argument("--patience", type=int, dest="train_patience_chunks")
    p.add_argument("--optimizer", choices=["adam", "sgd"], dest="train_optimizer")
    p.add_argument("--lstm-units", type=int, dest="model_lstm_units")
    p.add_argument("--dense-units", type=int, dest="model_dense_units")
    p.add_argument("--dropout", type=float, dest="model_dropout")
    _add_seed(p)

    p = sub.add_parser("sample", help="Generate SMILES strings from a checkpoint")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--n", type=int, dest="sampler_count")
    p.add_argument("--temp", type=float, dest="sampler_temperature")
    p.add_argument("--max-len", type=int, dest="sampler_max_len")
    p.add_argument("--out", type=Path, required=True, help="Valid strings, one per line")
    p.add_argument("--invalid-out", type=Path, help="Invalid strings with their error class")
    _add_seed(p)

    p = sub.add_parser("validate", help="Classify every line of a SMILES file")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("props", help="Compute descriptors for every valid line")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sa-table", type=Path)

    p = sub.add_parser("novelty", help="Fraction of generated molecules absent from the training set")
    p.add_argument("--generated", type=Path, required=True)
    p.add_argument("--training", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("temp-sweep", help="Malformed fraction per sampling temperature")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--temps", type=parse_floats, default=[0.5, 1.0, 1.5])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--max-len", type=int, dest="sampler_max_len")
    p.add_argument("--out", type=Path, required=True)
    _add_seed(p)

    p = sub.add_parser("hist", help="Property histograms and KS distances across labeled files")
    p.add_argument("--file", action="append", required=True, help="LABEL=PATH, repeatable")
    p.add_argument("--props", default=",".join(PROPERTIES[:-1]))
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--max-per-label", type=int, help="Random sample size per file")
    p.add_argument("--sa-table", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_seed(p)

    p = sub.add_parser("sa-pick", help="Compounds nearest SA score percentiles")
    p.add_argument("--generated", type=Path, required=True)
    p.add_argument("--training", type=Path, help="Compounds found here are excluded")
    p.add_argument("--sa-table", type=Path)
    p.add_argument("--percentiles", type=parse_floats, default=[5.0, 50.0, 95.0])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("build-sa-table", help="Fragment score table from a reference corpus")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)

    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        key: value
        for key, value in vars(args).items()
        if value is not None and (key in CONFIG_KEYS or key.startswith(SECTION_PREFIXES))
    }


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, config_overrides(args))
    except ValidationError as exc:
        print(f"✗ Invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_DATA
    configure_logging(config.log_level)
    seeds = stream_seeds(config.seed)
    try:
        return COMMANDS[args.command](args, config, seeds)
    except UsageError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"✗ Numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValidationError as exc:
        print(f"✗ Invalid value:\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_USAGE
