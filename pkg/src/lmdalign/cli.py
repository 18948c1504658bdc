"""Command-line pipeline.

Subcommands: ``train-embeddings`` (CBOW over a text corpus),
``procrustes`` (closed-form orthogonal fit plus retrieval scores),
``experiment`` (mapper training with per-epoch CSV/SVG emission), and
``plot`` (re-render an emitted CSV).

Exit codes: 0 success, 1 usage errors, 2 data errors (missing or malformed
files, bad shapes, empty vocabularies).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cbow import CbowConfig, train_cbow
from .embeddings import load_word2vec_text, normalize_rows, save_word2vec_text
from .experiments import ExperimentConfig, emit_csv, emit_plot, plot_csv, run_experiment
from .lexicon import filter_by_vocab, load_lexicon, to_matrices
from .mapper import Mapper, MapperConfig, save_mapper
from .metrics import NeighborIndex, lmd_accuracy, mean_cosine, rolling_ols_slope
from .procrustes import apply_map, orthogonal_procrustes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default; 2 is reserved for data errors
    # here, so usage problems are re-routed through an exception instead.
    def error(self, message):
        raise _UsageError(message)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lmdalign", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser(
        "train-embeddings", help="train CBOW embeddings over a text corpus"
    )
    train.add_argument("corpus", help="one sentence per line, UTF-8")
    train.add_argument("out", help="where to write the word2vec text file")
    train.add_argument("--dim", type=int, default=64)
    train.add_argument("--window", type=int, default=5)
    train.add_argument("--negatives", type=int, default=5)
    train.add_argument("--epochs", type=int, default=5)
    train.add_argument("--lr", type=float, default=0.05)
    train.add_argument("--min-count", type=int, default=5)
    train.add_argument("--seed", type=int, default=1)
    train.set_defaults(handler=_cmd_train_embeddings)

    procrustes = commands.add_parser(
        "procrustes", help="closed-form orthogonal fit between two spaces"
    )
    procrustes.add_argument("source", help="source embedding file")
    procrustes.add_argument("target", help="target embedding file")
    procrustes.add_argument("lexicon", help="tab-separated translation pairs")
    procrustes.add_argument("--k", type=_parse_ks, default=(1, 3, 5, 10),
                            help="comma-separated neighborhood sizes (default 1,3,5,10)")
    procrustes.add_argument("--normalize", action=argparse.BooleanOptionalAction,
                            default=True, help="row-normalize both spaces first")
    procrustes.add_argument("--save-map", metavar="PATH",
                            help="also save the fitted map as a checkpoint")
    procrustes.set_defaults(handler=_cmd_procrustes)

    experiment = commands.add_parser(
        "experiment", help="train a mapper and emit per-epoch metrics"
    )
    experiment.add_argument("source")
    experiment.add_argument("target")
    experiment.add_argument("lexicon")
    experiment.add_argument("--mode", choices=("in-sample", "held-out"), required=True)
    experiment.add_argument("--hidden", type=int, default=256,
                            help="hidden width; 0 selects the pure linear map")
    experiment.add_argument("--lr", type=float, default=0.05)
    experiment.add_argument("--batch-size", type=int, default=32)
    experiment.add_argument("--epochs", type=int, default=200)
    experiment.add_argument("--seed", type=int, default=0)
    experiment.add_argument("--train-fraction", type=float, default=0.8)
    experiment.add_argument("--split-seed", type=int, default=0)
    experiment.add_argument("--k", type=_parse_ks, default=(1, 3, 5, 10))
    experiment.add_argument("--normalize", action=argparse.BooleanOptionalAction,
                            default=True)
    experiment.add_argument("--csv", default="experiment.csv")
    experiment.add_argument("--svg", default="experiment.svg")
    experiment.add_argument("--slope-window", type=int, default=5,
                            help="window for the rolling OLS slope report")
    experiment.set_defaults(handler=_cmd_experiment)

    plot = commands.add_parser("plot", help="re-render the SVG chart for a CSV")
    plot.add_argument("csv")
    plot.add_argument("svg")
    plot.set_defaults(handler=_cmd_plot)
    return parser


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("every k must be an integer >= 1")
    return ks


def _read_lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _cmd_train_embeddings(args) -> int:
    config = CbowConfig(
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        initial_lr=args.lr,
        min_count=args.min_count,
        seed=args.seed,
    )
    space, losses = train_cbow(_read_lines(args.corpus), config)
    print(f"vocabulary size: {len(space)}")
    print(f"dimension: {space.dim}")
    for epoch, loss in enumerate(losses, start=1):
        print(f"epoch {epoch}: loss {loss:.6f}")
    save_word2vec_text(space, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_procrustes(args) -> int:
    source = load_word2vec_text(args.source)
    target = load_word2vec_text(args.target)
    if args.normalize:
        source, _ = normalize_rows(source)
        target, _ = normalize_rows(target)
    lexicon = load_lexicon(args.lexicon)
    usable, dropped = filter_by_vocab(lexicon, source, target)
    if dropped:
        print(f"dropped {len(dropped)} out-of-vocabulary pairs")
    if len(usable) == 0:
        raise ValueError("no usable lexicon pairs after vocabulary filtering")
    matrices = to_matrices(usable, source, target)
    fit = orthogonal_procrustes(matrices.x, matrices.y)
    predictions = apply_map(matrices.x, fit.rotation)
    index = NeighborIndex(target)
    truths = [t for _, t in usable.pairs]
    print(f"pairs: {len(usable)}")
    print(f"residual: {fit.residual:.9g}")
    print(f"mean_cosine: {mean_cosine(predictions, matrices.y):.9g}")
    for k in args.k:
        print(f"lmd_acc@{k}: {lmd_accuracy(index, predictions, truths, k):.9g}")
    if args.save_map:
        save_mapper(Mapper([fit.rotation]), args.save_map)
        print(f"wrote {args.save_map}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    source = load_word2vec_text(args.source)
    target = load_word2vec_text(args.target)
    lexicon = load_lexicon(args.lexicon)
    if args.slope_window < 2:
        raise _UsageError("--slope-window must be >= 2")
    config = ExperimentConfig(
        mode=args.mode.replace("-", "_"),
        mapper=MapperConfig(
            d_in=source.dim,
            d_out=target.dim,
            hidden=args.hidden,
            lr=args.lr,
            batch_size=args.batch_size,
            epochs=args.epochs,
            seed=args.seed,
        ),
        ks=args.k,
        train_fraction=args.train_fraction,
        split_seed=args.split_seed,
        normalize=args.normalize,
    )
    result = run_experiment(source, target, lexicon, config)
    emit_csv(result, args.csv)
    emit_plot(result, args.svg)

    baseline = result.baseline
    print(f"baseline residual: {baseline.residual:.9g}")
    print(f"baseline mean_cosine: {baseline.mean_cosine:.9g}")
    for k in config.ks:
        print(f"baseline lmd_acc@{k}: {baseline.lmd_acc[k]:.9g}")
    final = result.records[-1]
    print(
        f"final epoch {final.epoch}: train_loss {final.train_loss:.9g}, "
        f"mean_cosine {final.mean_cosine:.9g}"
    )
    for k in config.ks:
        print(f"final lmd_acc@{k}: {final.lmd_acc[k]:.9g}")
    smallest_k = config.ks[0]
    if len(result.records) >= args.slope_window:
        series = [(record.epoch, record.lmd_acc[smallest_k]) for record in result.records]
        slope = rolling_ols_slope(series, args.slope_window)[-1]
        print(
            f"rolling OLS slope of lmd_acc@{smallest_k} over the last "
            f"{args.slope_window} epochs: {slope:.9g}"
        )
    else:
        print("not enough epochs for the rolling slope window")
    print(f"wrote {args.csv}")
    print(f"wrote {args.svg}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    plot_csv(args.csv, args.svg)
    print(f"wrote {args.svg}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
