"""Trainable maps between embedding spaces, with manual cosine-loss backprop.

A :class:`Mapper` is either a single matrix (pure linear map) or two
matrices with a tanh in between; there are no bias terms.  Training is plain
SGD on the cosine loss ``1 - cos(prediction, target)``; gradients are closed
form and cross-checked against central finite differences by
:func:`grad_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .lexicon import PairedMatrices

__all__ = [
    "MapperConfig",
    "Mapper",
    "init_mapper",
    "forward",
    "cosine_loss",
    "gradient",
    "train_epoch",
    "grad_check",
    "save_mapper",
    "load_mapper",
]

_FLOAT_FORMAT = ".17g"  # bit-exact float64 round trips
_CHECKPOINT_MAGIC = "mapper"


@dataclass(frozen=True)
class MapperConfig:
    """Shape and SGD hyperparameters for a mapper.

    ``hidden = 0`` selects the pure linear map; ``lr = 0`` is allowed and
    leaves weights unchanged (useful for evaluation-only epochs).
    """

    d_in: int
    d_out: int
    hidden: int = 0
    lr: float = 0.05
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ValueError("d_in and d_out must be >= 1")
        if self.hidden < 0:
            raise ValueError("hidden must be >= 0 (0 means linear)")
        if not (self.lr >= 0.0 and math.isfinite(self.lr)):
            raise ValueError("lr must be a finite real >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class Mapper:
    """Bias-free map: one weight matrix, or two with tanh between them."""

    def __init__(self, weights):
        weights = [np.array(w, dtype=np.float64) for w in weights]
        if len(weights) not in (1, 2):
            raise ValueError(f"need 1 or 2 weight matrices, got {len(weights)}")
        for w in weights:
            if w.ndim != 2:
                raise ValueError("weights must be 2-D matrices")
            if not np.all(np.isfinite(w)):
                raise ValueError("weights contain non-finite entries")
        if len(weights) == 2 and weights[0].shape[1] != weights[1].shape[0]:
            raise ValueError(
                f"inner shapes disagree: {weights[0].shape} then {weights[1].shape}"
            )
        self.weights = weights

    @property
    def d_in(self) -> int:
        return int(self.weights[0].shape[0])

    @property
    def d_out(self) -> int:
        return int(self.weights[-1].shape[1])

    @property
    def hidden(self) -> int:
        return 0 if len(self.weights) == 1 else int(self.weights[0].shape[1])


def init_mapper(config: MapperConfig) -> Mapper:
    """Fresh mapper with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights."""
    rng = seeding.generator(config.seed)
    if config.hidden == 0:
        bound = 1.0 / math.sqrt(config.d_in)
        weights = [rng.uniform(-bound, bound, (config.d_in, config.d_out))]
    else:
        bound1 = 1.0 / math.sqrt(config.d_in)
        bound2 = 1.0 / math.sqrt(config.hidden)
        weights = [
            rng.uniform(-bound1, bound1, (config.d_in, config.hidden)),
            rng.uniform(-bound2, bound2, (config.hidden, config.d_out)),
        ]
    return Mapper(weights)


def forward(mapper: Mapper, x) -> np.ndarray:
    """Map one vector or a stack of row vectors through the mapper."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ValueError(f"input must be 1-D or 2-D, got {x.ndim}-D")
    if x.shape[-1] != mapper.d_in:
        raise ValueError(f"input width {x.shape[-1]} != d_in {mapper.d_in}")
    if len(mapper.weights) == 1:
        return x @ mapper.weights[0]
    return np.tanh(x @ mapper.weights[0]) @ mapper.weights[1]


def cosine_loss(y_hat, y) -> float:
    """``1 - cos(y_hat, y)``, in [0, 2]; exactly 0.0 for bit-identical inputs.

    The cosine is computed as dot/sqrt(dot*dot) with a final clip into
    [-1, 1]; no epsilon is ever added inside the formula (that would corrupt
    finite-difference gradient checks).
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape or y_hat.ndim != 1:
        raise ValueError("y_hat and y must be 1-D vectors of equal length")
    self_hat = float(np.dot(y_hat, y_hat))
    self_true = float(np.dot(y, y))
    if self_hat == 0.0 or self_true == 0.0:
        raise ValueError("cosine loss undefined for zero-norm vectors")
    cosine = float(np.dot(y_hat, y)) / math.sqrt(self_hat * self_true)
    return 1.0 - min(1.0, max(-1.0, cosine))


def _batch_pass(mapper: Mapper, x: np.ndarray, y: np.ndarray, need_grads: bool):
    """Shared forward/backward core over a batch.

    Returns (per-row losses over usable rows, gradient list or None,
    degenerate row indices).  Degenerate = either side has zero norm; the
    gradients are for the MEAN loss over usable rows.
    """
    linear = len(mapper.weights) == 1
    if linear:
        hidden_act = None
        y_hat = x @ mapper.weights[0]
    else:
        hidden_act = np.tanh(x @ mapper.weights[0])
        y_hat = hidden_act @ mapper.weights[1]

    num = np.einsum("ij,ij->i", y_hat, y)
    self_hat = np.einsum("ij,ij->i", y_hat, y_hat)
    self_true = np.einsum("ij,ij->i", y, y)
    usable = (self_hat > 0.0) & (self_true > 0.0)
    degenerate = [int(i) for i in np.flatnonzero(~usable)]
    used = np.flatnonzero(usable)
    if used.size == 0:
        return np.empty(0), None, degenerate

    denom = np.sqrt(self_hat[used] * self_true[used])
    cosine = num[used] / denom
    losses = 1.0 - np.clip(cosine, -1.0, 1.0)

    grads = None
    if need_grads:
        # dL/dy_hat = num * y_hat / (|y_hat|^3 |y|) - y / (|y_hat| |y|)
        g_used = (
            y_hat[used] * (num[used] / (self_hat[used] * denom))[:, None]
            - y[used] / denom[:, None]
        )
        g_full = np.zeros_like(y_hat)
        g_full[used] = g_used / used.size
        if linear:
            grads = [x.T @ g_full]
        else:
            g_hidden = (1.0 - hidden_act * hidden_act) * (g_full @ mapper.weights[1].T)
            grads = [x.T @ g_hidden, hidden_act.T @ g_full]
    return losses, grads, degenerate


def gradient(mapper: Mapper, x, y) -> tuple[list[np.ndarray], list[int]]:
    """Analytic gradient of the mean cosine loss over a batch.

    ``x`` and ``y`` are row-aligned (typically slices of a
    :class:`~lmdalign.lexicon.PairedMatrices`); zero-norm rows are skipped
    and their indices returned.  A batch with no usable row is an error.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    if x.shape[1] != mapper.d_in or y.shape[1] != mapper.d_out:
        raise ValueError("row widths do not match the mapper shapes")
    _, grads, degenerate = _batch_pass(mapper, x, y, need_grads=True)
    if grads is None:
        raise ValueError("every row in the batch is degenerate (zero norm)")
    return grads, degenerate


def train_epoch(
    mapper: Mapper, data: PairedMatrices, config: MapperConfig, epoch_index: int
) -> float:
    """One SGD pass; returns the mean cosine loss over the epoch's usable rows.

    Rows are shuffled deterministically by (config.seed, epoch_index) and cut
    into consecutive batches; each batch's loss is measured before its
    update.  With ``lr = 0`` the weights come out unchanged.
    """
    x, y = data.x, data.y
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty pair set")
    order = seeding.generator(config.seed, epoch_index).permutation(n)
    loss_parts: list[float] = []
    used_total = 0
    for start in range(0, n, config.batch_size):
        rows = order[start : start + config.batch_size]
        losses, grads, _ = _batch_pass(mapper, x[rows], y[rows], need_grads=True)
        if grads is None:
            continue  # fully degenerate batch: nothing to learn from
        loss_parts.extend(float(v) for v in losses)
        used_total += int(losses.size)
        for w, g in zip(mapper.weights, grads):
            w -= config.lr * g
    if used_total == 0:
        raise ValueError("every row in the epoch was degenerate (zero norm)")
    return math.fsum(loss_parts) / used_total


def grad_check(mapper: Mapper, sample, epsilon: float = 1e-6, analytic=None) -> float:
    """Worst relative disagreement between analytic and numeric gradients.

    Central differences of the loss at ``sample = (x, y)`` are compared
    entry-wise against the analytic gradient; the relative error is
    ``|a - n| / max(1e-12, |a| + |n|)``.  Pass ``analytic`` to check a
    caller-supplied gradient instead (e.g. a deliberately corrupted one).
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be > 0")
    x, y = sample
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if analytic is None:
        analytic, _ = gradient(mapper, x, y)
    worst = 0.0
    for w, g in zip(mapper.weights, analytic):
        for idx in np.ndindex(*w.shape):
            original = w[idx]
            w[idx] = original + epsilon
            upper = cosine_loss(forward(mapper, x), y)
            w[idx] = original - epsilon
            lower = cosine_loss(forward(mapper, x), y)
            w[idx] = original
            numeric = (upper - lower) / (2.0 * epsilon)
            analytic_entry = float(g[idx])
            relative = abs(analytic_entry - numeric) / max(
                1e-12, abs(analytic_entry) + abs(numeric)
            )
            if relative > worst:
                worst = relative
    return worst


def save_mapper(mapper: Mapper, path) -> None:
    """Write a text checkpoint.

    Line 1 is ``mapper <k>`` (k = number of matrices), line 2 the flattened
    shapes, then one whitespace-separated row per matrix row at 17
    significant digits (bit-exact reload).
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{_CHECKPOINT_MAGIC} {len(mapper.weights)}\n")
        handle.write(" ".join(f"{w.shape[0]} {w.shape[1]}" for w in mapper.weights) + "\n")
        for w in mapper.weights:
            for row in w:
                handle.write(" ".join(format(v, _FLOAT_FORMAT) for v in row) + "\n")


def load_mapper(path) -> Mapper:
    """Reload a checkpoint written by :func:`save_mapper`."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ValueError("empty checkpoint file")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != _CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint header {lines[0]!r}")
    try:
        matrix_count = int(magic[1])
    except ValueError:
        raise ValueError(f"bad checkpoint header {lines[0]!r}") from None
    if matrix_count not in (1, 2):
        raise ValueError(f"checkpoint must hold 1 or 2 matrices, says {matrix_count}")
    if len(lines) < 2:
        raise ValueError("checkpoint missing shape line")
    shape_fields = lines[1].split()
    if len(shape_fields) != 2 * matrix_count:
        raise ValueError(f"shape line has {len(shape_fields)} fields, expected {2 * matrix_count}")
    try:
        dims = [int(v) for v in shape_fields]
    except ValueError:
        raise ValueError("non-integer entry in shape line") from None
    shapes = [(dims[2 * i], dims[2 * i + 1]) for i in range(matrix_count)]
    if any(r < 1 or c < 1 for r, c in shapes):
        raise ValueError("checkpoint shapes must be positive")

    expected_rows = sum(r for r, _ in shapes)
    body = lines[2:]
    if len(body) != expected_rows:
        raise ValueError(f"checkpoint has {len(body)} data rows, expected {expected_rows}")
    weights = []
    cursor = 0
    for rows, cols in shapes:
        block = np.empty((rows, cols))
        for r in range(rows):
            fields = body[cursor].split()
            if len(fields) != cols:
                raise ValueError(
                    f"row width {len(fields)} ≠ {cols} at checkpoint line {cursor + 3}"
                )
            try:
                block[r] = [float(v) for v in fields]
            except ValueError:
                raise ValueError(
                    f"non-numeric value at checkpoint line {cursor + 3}"
                ) from None
            cursor += 1
        weights.append(block)
    return Mapper(weights)
