"""Model-defined neighborhood metrics.

The core judgment is set inclusion: a prediction counts as correct at level
``k`` when the truth token lies inside the target model's ``k``-nearest
cosine neighborhood of the predicted vector.  ``lmd_acc@k`` is the fraction
of predictions for which that holds; ``k = 1`` is exact retrieval.  Mean
cosine similarity is reported next to it as the continuous comparison.

Ties in cosine score are broken by ascending vocabulary index, so retrieval
is fully deterministic; duplicate vectors make the tie-break observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace, normalize_rows

__all__ = [
    "NeighborSet",
    "NeighborIndex",
    "knn",
    "lmd",
    "truth_ranks",
    "lmd_accuracy",
    "row_cosines",
    "mean_cosine",
    "MetricRecord",
    "rolling_ols_slope",
]

# Rank assigned to rows that can never be retrieved (zero-norm prediction or
# a truth token whose embedding row is zero): larger than any meaningful k.
_UNREACHABLE_RANK = np.iinfo(np.int64).max


@dataclass(frozen=True)
class NeighborSet:
    """Top-k retrieval result: vocabulary indices with their cosine scores.

    Scores are non-increasing; equal scores are ordered by ascending index.
    """

    indices: tuple[int, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.scores):
            raise ValueError("indices and scores must have equal length")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices


class NeighborIndex:
    """Frozen cosine-retrieval view over a row-normalized embedding space.

    The constructor normalizes a copy of the space, excludes zero rows from
    candidacy (their tokens land on ``zero_tokens``), and never changes
    afterwards, so it can be queried from inside a training loop without
    feedback effects.
    """

    def __init__(self, space: EmbeddingSpace):
        normalized, zero_tokens = normalize_rows(space)
        self.space = normalized
        self.zero_tokens = tuple(zero_tokens)
        zero_positions = {normalized.vocab.position(t) for t in zero_tokens}
        self.candidate_ids = np.array(
            [i for i in range(len(normalized)) if i not in zero_positions],
            dtype=np.int64,
        )
        self.candidate_ids.setflags(write=False)
        self._matrix = normalized.matrix[self.candidate_ids]
        self._matrix.setflags(write=False)
        # vocabulary position -> candidate slot, -1 for excluded rows
        slots = np.full(len(normalized), -1, dtype=np.int64)
        slots[self.candidate_ids] = np.arange(self.candidate_ids.size)
        slots.setflags(write=False)
        self._slot_of = slots

    @property
    def vocab(self):
        return self.space.vocab

    @property
    def candidate_count(self) -> int:
        return int(self.candidate_ids.size)

    def cosine_scores(self, query) -> np.ndarray:
        """Cosine of the query against every candidate row.

        The query must be finite and nonzero; its scale does not matter.
        """
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1:
            raise ValueError(f"query must be 1-D, got {q.ndim}-D")
        if q.shape[0] != self.space.dim:
            raise ValueError(f"query width {q.shape[0]} != space dim {self.space.dim}")
        if not np.all(np.isfinite(q)):
            raise ValueError("query contains non-finite values")
        norm = math.sqrt(float(np.dot(q, q)))
        if norm == 0.0:
            raise ValueError("query vector has zero norm")
        return self._matrix @ (q / norm)


def knn(index: NeighborIndex, query, k: int) -> NeighborSet:
    """The k nearest candidates by cosine, ties broken by ascending index.

    Returns ``min(k, candidate_count)`` neighbors; ``k`` at or above the
    candidate count returns every candidate, fully ordered.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.cosine_scores(query)
    # lexsort: last key is primary -> score descending, then index ascending
    order = np.lexsort((index.candidate_ids, -scores))[:k]
    return NeighborSet(
        indices=tuple(int(index.candidate_ids[pos]) for pos in order),
        scores=tuple(float(scores[pos]) for pos in order),
    )


def lmd(index: NeighborIndex, p_hat, t: str, k: int) -> bool:
    """True iff truth token ``t`` is inside the k-neighborhood of ``p_hat``.

    Monotone in ``k`` by construction.  An out-of-vocabulary truth raises;
    a zero prediction vector raises; a truth whose embedding row is zero is
    never retrievable and gives False.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    position = index.vocab.position(t)
    scores = index.cosine_scores(p_hat)
    slot = int(index._slot_of[position])
    if slot < 0:
        return False
    return _rank_from_scores(index, scores, position, slot) < k


def _rank_from_scores(
    index: NeighborIndex, scores: np.ndarray, position: int, slot: int
) -> int:
    # Rank = number of candidates strictly preferred under the retrieval
    # order (score descending, vocabulary index ascending).  rank < k is
    # exactly membership in the knn top-k.
    truth_score = scores[slot]
    better = int(np.count_nonzero(scores > truth_score))
    tied_earlier = int(
        np.count_nonzero((scores == truth_score) & (index.candidate_ids < position))
    )
    return better + tied_earlier


def truth_ranks(
    index: NeighborIndex, predictions, truths
) -> tuple[np.ndarray, list[int]]:
    """Retrieval rank of each truth token (0 = nearest neighbor).

    Rows whose prediction has zero norm are reported as degenerate and,
    like truths whose embedding row is zero, get a rank past any usable
    ``k`` so they count as misses everywhere.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    if preds.ndim != 2:
        raise ValueError("predictions must be a 2-D row stack")
    truths = list(truths)
    if preds.shape[0] != len(truths):
        raise ValueError(f"{preds.shape[0]} prediction rows for {len(truths)} truths")
    if preds.shape[0] < 1:
        raise ValueError("need at least one prediction row")
    if preds.shape[1] != index.space.dim:
        raise ValueError(
            f"prediction width {preds.shape[1]} != space dim {index.space.dim}"
        )
    positions = [index.vocab.position(t) for t in truths]

    ranks = np.empty(len(truths), dtype=np.int64)
    degenerate: list[int] = []
    for row, (vector, position) in enumerate(zip(preds, positions)):
        if float(np.dot(vector, vector)) == 0.0:
            degenerate.append(row)
            ranks[row] = _UNREACHABLE_RANK
            continue
        slot = int(index._slot_of[position])
        if slot < 0:
            ranks[row] = _UNREACHABLE_RANK
            continue
        scores = index.cosine_scores(vector)
        ranks[row] = _rank_from_scores(index, scores, position, slot)
    return ranks, degenerate


def lmd_accuracy(index: NeighborIndex, predictions, truths, k: int) -> float:
    """Fraction of rows whose truth token is inside the top-k neighborhood.

    Equal to the mean of :func:`lmd` over the rows (shared scoring path);
    degenerate prediction rows count as misses at every ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks, _ = truth_ranks(index, predictions, truths)
    return float(np.count_nonzero(ranks < k)) / ranks.size


def row_cosines(predictions, targets) -> tuple[np.ndarray, list[int]]:
    """Row-wise cosine similarity; zero-norm rows are skipped and reported.

    Computed as dot/sqrt(dot*dot) then clipped into [-1, 1], so a row that
    is bit-identical on both sides scores exactly 1.0.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.ndim != 2 or p.shape != t.shape:
        raise ValueError(f"need equal 2-D shapes, got {p.shape} and {t.shape}")
    if p.shape[0] < 1:
        raise ValueError("need at least one row")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(t))):
        raise ValueError("inputs contain non-finite values")
    num = np.einsum("ij,ij->i", p, t)
    self_p = np.einsum("ij,ij->i", p, p)
    self_t = np.einsum("ij,ij->i", t, t)
    usable = (self_p > 0.0) & (self_t > 0.0)
    skipped = [int(i) for i in np.flatnonzero(~usable)]
    used = np.flatnonzero(usable)
    cosines = num[used] / np.sqrt(self_p[used] * self_t[used])
    np.clip(cosines, -1.0, 1.0, out=cosines)
    return cosines, skipped


def mean_cosine(predictions, targets) -> float:
    """Order-independent mean of the row cosines (fsum); skips zero rows."""
    cosines, _ = row_cosines(predictions, targets)
    if cosines.size == 0:
        raise ValueError("no usable rows: every row has a zero-norm side")
    return math.fsum(float(c) for c in cosines) / cosines.size


@dataclass(frozen=True)
class MetricRecord:
    """One evaluation row of a training run.

    ``lmd_acc`` maps k to accuracy and is stored sorted by k; accuracies
    must be non-decreasing in k (1e-9 slack so CSV reloads at 9 significant
    digits still construct).
    """

    epoch: int
    train_loss: float
    mean_cosine: float
    lmd_acc: dict[int, float]

    def __post_init__(self):
        if not self.lmd_acc:
            raise ValueError("lmd_acc must hold at least one k")
        ordered = dict(sorted((int(k), float(v)) for k, v in self.lmd_acc.items()))
        if any(k < 1 for k in ordered):
            raise ValueError("every k must be >= 1")
        values = list(ordered.values())
        for earlier, later in zip(values, values[1:]):
            if later < earlier - 1e-9:
                raise ValueError("lmd_acc must be non-decreasing in k")
        for value in values + [self.mean_cosine, self.train_loss]:
            if not math.isfinite(value):
                raise ValueError("metric values must be finite")
        if not -1.0 - 1e-9 <= self.mean_cosine <= 1.0 + 1e-9:
            raise ValueError("mean_cosine must lie in [-1, 1]")
        object.__setattr__(self, "lmd_acc", ordered)
        object.__setattr__(self, "epoch", int(self.epoch))


def rolling_ols_slope(series, window: int) -> list[float]:
    """OLS slope over each length-``window`` run of consecutive points.

    ``series`` is an iterable of (x, y) with strictly increasing x; the
    slope of window w is ``sum((x-xbar)(y-ybar)) / sum((x-xbar)^2)``.
    """
    points = list(series)
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(points) < window:
        raise ValueError(f"series length {len(points)} < window {window}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("series contains non-finite values")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x values must be strictly increasing")
    slopes: list[float] = []
    for start in range(len(points) - window + 1):
        xw = xs[start : start + window]
        yw = ys[start : start + window]
        x_centered = xw - xw.mean()
        denominator = float(np.dot(x_centered, x_centered))
        if denominator == 0.0:
            raise ValueError("degenerate x window (zero variance)")
        slopes.append(float(np.dot(x_centered, yw - yw.mean()) / denominator))
    return slopes
