"""Desk-scale CBOW trainer with negative sampling.

The mean of the context vectors inside a symmetric window predicts the
center word; the output-side scores are pushed up for the true center and
down for sampled negatives.  Training is single-threaded, processes the
corpus in order, and draws all randomness from one seeded generator, so a
fixed corpus and config reproduce the embedding matrix bit for bit.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import seeding
from .embeddings import EmbeddingSpace, Vocabulary

__all__ = [
    "CbowConfig",
    "UnigramTable",
    "tokenize",
    "build_vocab",
    "sample_negative",
    "train_cbow",
]

_STRIP_CHARS = '.,;:!?"\'()[]¿¡'
_NS_EXPONENT = 0.75
_LR_FLOOR_FRACTION = 0.1  # linear decay target: initial_lr / 10


@dataclass(frozen=True)
class CbowConfig:
    """Hyperparameters for :func:`train_cbow`."""

    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.05
    min_count: int = 5
    seed: int = 1

    def __post_init__(self):
        for name in ("dim", "window", "negatives", "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (self.initial_lr > 0.0 and math.isfinite(self.initial_lr)):
            raise ValueError("initial_lr must be a positive finite real")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def tokenize(line: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties."""
    tokens = []
    for raw in line.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens


def build_vocab(corpus: Iterable[str], min_count: int) -> tuple[Vocabulary, np.ndarray]:
    """Frequency-filtered vocabulary plus the aligned count table.

    Tokens are ordered by count descending, ties alphabetically; tokens seen
    fewer than ``min_count`` times are dropped.  An empty result is an error.
    """
    counts: Counter[str] = Counter()
    for line in corpus:
        counts.update(tokenize(line))
    return _vocab_from_counts(counts, min_count)


def _vocab_from_counts(counts: Counter, min_count: int) -> tuple[Vocabulary, np.ndarray]:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    kept = sorted(
        ((token, n) for token, n in counts.items() if n >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    if not kept:
        raise ValueError(f"no token reaches min_count={min_count}")
    vocab = Vocabulary(tuple(token for token, _ in kept))
    frequencies = np.array([n for _, n in kept], dtype=np.int64)
    return vocab, frequencies


class UnigramTable:
    """Cumulative sampling weights proportional to ``frequency ** alpha``.

    The cumulative array is strictly increasing across positive-frequency
    tokens; zero-frequency tokens get zero weight and are never drawn.
    """

    def __init__(self, frequencies, alpha: float = _NS_EXPONENT):
        freqs = np.asarray(frequencies, dtype=np.float64)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ValueError("need a non-empty 1-D frequency array")
        if not np.all(np.isfinite(freqs)) or np.any(freqs < 0):
            raise ValueError("frequencies must be finite and non-negative")
        if not (alpha >= 0.0 and math.isfinite(alpha)):
            raise ValueError("alpha must be a finite real >= 0")
        # freqs ** 0.0 would turn zero counts into weight 1; keep them at 0.
        weights = np.where(freqs > 0.0, freqs**alpha, 0.0)
        if not np.any(weights > 0.0):
            raise ValueError("no token has positive frequency")
        self.alpha = float(alpha)
        self.weights = weights
        self.cumulative = np.cumsum(weights)

    def __len__(self) -> int:
        return int(self.weights.size)

    def sample(self, rng: np.random.Generator) -> int:
        """One token index drawn with probability proportional to its weight."""
        total = self.cumulative[-1]
        return int(np.searchsorted(self.cumulative, rng.random() * total, side="right"))

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        total = self.cumulative[-1]
        return np.searchsorted(self.cumulative, rng.random(count) * total, side="right")


def sample_negative(table: UnigramTable, rng: np.random.Generator) -> int:
    """Draw one negative-sample index from the unigram table."""
    return table.sample(rng)


def train_cbow(corpus: Iterable[str], config: CbowConfig) -> tuple[EmbeddingSpace, list[float]]:
    """Train input-side CBOW vectors; returns the space and mean loss per epoch.

    The loss per center is the negative-sampling log loss
    ``-log s(h.w_center) - sum(log s(-h.w_neg))`` with ``h`` the mean context
    vector.  Sentences with fewer than two in-vocabulary tokens carry no
    trainable center and are skipped; a corpus with none at all is an error.
    """
    tokenized = [tokenize(line) for line in corpus]
    counts: Counter[str] = Counter()
    for sentence in tokenized:
        counts.update(sentence)
    vocab, frequencies = _vocab_from_counts(counts, config.min_count)
    word_ids = {token: i for i, token in enumerate(vocab.tokens)}
    sentences = [
        np.array([word_ids[t] for t in sentence if t in word_ids], dtype=np.int64)
        for sentence in tokenized
    ]
    sentences = [s for s in sentences if len(s) >= 2]
    if not sentences:
        raise ValueError("corpus has no sentence with two in-vocabulary tokens")

    table = UnigramTable(frequencies, _NS_EXPONENT)
    rng = seeding.generator(config.seed)
    n, dim = len(vocab), config.dim
    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))

    centers_per_epoch = sum(len(s) for s in sentences)
    total_steps = centers_per_epoch * config.epochs
    lr0 = config.initial_lr
    window = config.window
    negatives = config.negatives
    step = 0
    epoch_losses: list[float] = []

    for _epoch in range(config.epochs):
        losses: list[float] = []
        for sentence in sentences:
            length = len(sentence)
            for pos in range(length):
                center = int(sentence[pos])
                lo = pos - window if pos > window else 0
                hi = pos + window + 1
                context = np.concatenate((sentence[lo:pos], sentence[pos + 1 : hi]))
                lr = lr0 * (1.0 - (1.0 - _LR_FLOOR_FRACTION) * (step / total_steps))
                step += 1

                h = w_in[context].mean(axis=0)
                drawn = table.sample_many(rng, negatives)
                drawn = drawn[drawn != center]  # never use the center as its own negative
                targets = np.concatenate(([center], drawn))
                scores = w_out[targets] @ h
                losses.append(
                    float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())
                )
                gain = (_label_vector(len(targets)) - _sigmoid(scores)) * lr
                delta_h = gain @ w_out[targets]
                # add.at handles repeated indices (duplicate context words,
                # repeated negative draws) where fancy-index += would not
                np.add.at(w_out, targets, np.outer(gain, h))
                np.add.at(w_in, context, delta_h / len(context))
        epoch_losses.append(math.fsum(losses) / len(losses))

    return EmbeddingSpace(vocab, w_in), epoch_losses


def _label_vector(count: int) -> np.ndarray:
    labels = np.zeros(count)
    labels[0] = 1.0
    return labels


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Stable in both tails; never overflows.
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    grown = np.exp(x[~positive])
    out[~positive] = grown / (1.0 + grown)
    return out
