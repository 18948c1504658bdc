"""Bilingual supervision pairs and their paired training matrices.

Lexicon files are tab-separated, one ``<source>\\t<target>`` pair per line;
blank lines and ``#`` comment lines are skipped.  The same source may map to
several targets, but an exactly repeated pair is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import seeding
from .embeddings import EmbeddingSpace, OOVError

__all__ = [
    "LexiconFormatError",
    "BilingualLexicon",
    "DroppedPair",
    "PairedMatrices",
    "load_lexicon",
    "filter_by_vocab",
    "split",
    "to_matrices",
]


class LexiconFormatError(ValueError):
    """A lexicon file line violates the tab-separated pair format."""


@dataclass(frozen=True)
class BilingualLexicon:
    """Ordered (source, target) translation pairs, duplicate-free."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple((str(s), str(t)) for s, t in self.pairs)
        seen: set[tuple[str, str]] = set()
        for source, target in pairs:
            for token in (source, target):
                if not token or any(ch.isspace() for ch in token):
                    raise ValueError(f"token {token!r} is empty or contains whitespace")
            if (source, target) in seen:
                raise ValueError(f"duplicate pair {source!r} -> {target!r}")
            seen.add((source, target))
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


class DroppedPair(NamedTuple):
    """A pair removed by vocabulary filtering, with the side that was missing."""

    source: str
    target: str
    missing_side: str  # "source", "target", or "both"


@dataclass(frozen=True, eq=False)
class PairedMatrices:
    """Row-aligned source/target vectors for a lexicon's kept pairs.

    Row ``i`` of ``x`` and of ``y`` belong to ``kept_pairs[i]``.  Matrices
    are float64 copies, write-locked.
    """

    x: np.ndarray
    y: np.ndarray
    kept_pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64)
        kept = tuple((str(s), str(t)) for s, t in self.kept_pairs)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("x and y must be 2-D")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"row mismatch: x has {x.shape[0]}, y has {y.shape[0]}")
        if x.shape[0] != len(kept):
            raise ValueError(
                f"{x.shape[0]} rows for {len(kept)} pairs"
            )
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "kept_pairs", kept)

    def __len__(self) -> int:
        return len(self.kept_pairs)


def load_lexicon(path) -> BilingualLexicon:
    """Parse a tab-separated lexicon file.

    Raises :class:`LexiconFormatError` with a line number for lines that are
    not exactly two non-empty, whitespace-free fields, and for duplicates.
    """
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise LexiconFormatError(
                    f"line {lineno}: expected '<source>\\t<target>', got {line!r}"
                )
            source, target = fields[0].strip(), fields[1].strip()
            if not source or not target or any(ch.isspace() for ch in source + target):
                raise LexiconFormatError(
                    f"line {lineno}: tokens must be non-empty and whitespace-free"
                )
            if (source, target) in seen:
                raise LexiconFormatError(
                    f"line {lineno}: duplicate pair {source!r} -> {target!r}"
                )
            seen.add((source, target))
            pairs.append((source, target))
    return BilingualLexicon(tuple(pairs))


def filter_by_vocab(
    lexicon: BilingualLexicon,
    source_space: EmbeddingSpace,
    target_space: EmbeddingSpace,
) -> tuple[BilingualLexicon, list[DroppedPair]]:
    """Keep pairs whose both tokens are in-vocabulary; report the dropped ones."""
    kept: list[tuple[str, str]] = []
    dropped: list[DroppedPair] = []
    for source, target in lexicon.pairs:
        source_ok = source in source_space.vocab
        target_ok = target in target_space.vocab
        if source_ok and target_ok:
            kept.append((source, target))
        elif not source_ok and not target_ok:
            dropped.append(DroppedPair(source, target, "both"))
        elif not source_ok:
            dropped.append(DroppedPair(source, target, "source"))
        else:
            dropped.append(DroppedPair(source, target, "target"))
    return BilingualLexicon(tuple(kept)), dropped


def split(
    lexicon: BilingualLexicon, train_fraction: float, seed: int
) -> tuple[BilingualLexicon, BilingualLexicon]:
    """Disjoint train/test partition by a seeded shuffle.

    The train side gets ``round(train_fraction * len(lexicon))`` pairs; the
    union of the two sides is the input lexicon.
    """
    if len(lexicon) < 2:
        raise ValueError("need at least 2 pairs to split")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    order = seeding.generator(seed).permutation(len(lexicon))
    n_train = round(train_fraction * len(lexicon))
    pairs = lexicon.pairs
    train = BilingualLexicon(tuple(pairs[i] for i in order[:n_train]))
    test = BilingualLexicon(tuple(pairs[i] for i in order[n_train:]))
    return train, test


def to_matrices(
    lexicon: BilingualLexicon,
    source_space: EmbeddingSpace,
    target_space: EmbeddingSpace,
) -> PairedMatrices:
    """Stack each pair's vectors into row-aligned matrices.

    Every token must be in-vocabulary (run :func:`filter_by_vocab` first);
    an empty lexicon gives legal (0, d) matrices.
    """
    try:
        x_rows = [source_space.lookup(source) for source, _ in lexicon.pairs]
        y_rows = [target_space.lookup(target) for _, target in lexicon.pairs]
    except OOVError as exc:
        raise OOVError(
            f"{exc.args[0]!r} is out of vocabulary; run filter_by_vocab first"
        ) from None
    x = np.array(x_rows, dtype=np.float64) if x_rows else np.empty((0, source_space.dim))
    y = np.array(y_rows, dtype=np.float64) if y_rows else np.empty((0, target_space.dim))
    return PairedMatrices(x=x, y=y, kept_pairs=lexicon.pairs)
