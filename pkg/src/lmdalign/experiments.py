"""End-to-end mapping experiments.

``run_experiment`` trains a mapper between two embedding spaces under
lexicon supervision, scores every epoch on the evaluation pairs
(``lmd_acc@k`` for each configured k, plus mean cosine), and always fits the
closed-form orthogonal baseline on the same training pairs for comparison.
Results serialize to a CSV with 9-significant-digit values and to a
self-contained SVG chart; both emissions are byte-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSpace, normalize_rows
from .lexicon import BilingualLexicon, filter_by_vocab, split, to_matrices
from .mapper import MapperConfig, forward, init_mapper, train_epoch
from .metrics import MetricRecord, NeighborIndex, mean_cosine, truth_ranks
from .procrustes import apply_map, orthogonal_procrustes

__all__ = [
    "MODES",
    "ExperimentConfig",
    "BaselineResult",
    "ExperimentResult",
    "run_experiment",
    "emit_csv",
    "read_csv",
    "emit_plot",
    "plot_csv",
]

MODES = ("in_sample", "held_out")

_CSV_FORMAT = ".9g"
_MIN_USABLE_PAIRS = 10


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run: evaluation mode, mapper hyperparameters, k list, split."""

    mode: str
    mapper: MapperConfig
    ks: tuple[int, ...] = (1, 3, 5, 10)
    train_fraction: float = 0.8
    split_seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        ks = tuple(sorted({int(k) for k in self.ks}))
        if not ks or ks[0] < 1:
            raise ValueError("ks must be a non-empty list of integers >= 1")
        object.__setattr__(self, "ks", ks)
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class BaselineResult:
    """Closed-form orthogonal fit scored on the same evaluation pairs."""

    residual: float
    train_loss: float
    mean_cosine: float
    lmd_acc: dict[int, float]


@dataclass(frozen=True)
class ExperimentResult:
    """Per-epoch records (epochs contiguous from 1) plus the baseline."""

    records: tuple[MetricRecord, ...]
    baseline: BaselineResult
    config: ExperimentConfig

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise ValueError("need at least one epoch record")
        for expected, record in enumerate(records, start=1):
            if record.epoch != expected:
                raise ValueError("record epochs must be contiguous from 1")
        object.__setattr__(self, "records", records)


def run_experiment(
    source_space: EmbeddingSpace,
    target_space: EmbeddingSpace,
    lexicon: BilingualLexicon,
    config: ExperimentConfig,
) -> ExperimentResult:
    """Train and score a mapper; always benchmark the closed-form baseline.

    ``in_sample`` evaluates on the training pairs themselves (the split
    settings are ignored); ``held_out`` splits the usable pairs and
    evaluates on the test side.  Retrieval always runs against the FULL
    target space, not just lexicon targets.
    """
    if config.normalize:
        source_space, _ = normalize_rows(source_space)
        target_space, _ = normalize_rows(target_space)
    usable, _dropped = filter_by_vocab(lexicon, source_space, target_space)
    if len(usable) < _MIN_USABLE_PAIRS:
        raise ValueError(
            f"{len(usable)} usable pairs after vocabulary filtering, "
            f"need >= {_MIN_USABLE_PAIRS}"
        )
    mapper_config = config.mapper
    if mapper_config.d_in != source_space.dim or mapper_config.d_out != target_space.dim:
        raise ValueError(
            f"mapper {mapper_config.d_in}->{mapper_config.d_out} does not fit "
            f"spaces {source_space.dim}->{target_space.dim}"
        )
    if source_space.dim != target_space.dim:
        raise ValueError("the closed-form baseline needs equal source/target dimensions")

    if config.mode == "in_sample":
        train_lexicon = eval_lexicon = usable
    else:
        train_lexicon, eval_lexicon = split(usable, config.train_fraction, config.split_seed)
        if len(train_lexicon) == 0 or len(eval_lexicon) == 0:
            raise ValueError(
                "held-out split produced an empty side; adjust train_fraction"
            )

    train_matrices = to_matrices(train_lexicon, source_space, target_space)
    eval_matrices = to_matrices(eval_lexicon, source_space, target_space)
    index = NeighborIndex(target_space)
    eval_truths = [target for _, target in eval_lexicon.pairs]

    baseline = _run_baseline(train_matrices, eval_matrices, eval_truths, index, config.ks)

    mapper = init_mapper(mapper_config)
    records = []
    for epoch in range(1, mapper_config.epochs + 1):
        loss = train_epoch(mapper, train_matrices, mapper_config, epoch)
        predictions = forward(mapper, eval_matrices.x)
        records.append(
            MetricRecord(
                epoch=epoch,
                train_loss=loss,
                mean_cosine=mean_cosine(predictions, eval_matrices.y),
                lmd_acc=_accuracy_by_k(index, predictions, eval_truths, config.ks),
            )
        )
    return ExperimentResult(records=tuple(records), baseline=baseline, config=config)


def _accuracy_by_k(index, predictions, truths, ks) -> dict[int, float]:
    # One rank pass serves every k; identical to lmd_accuracy per k.
    ranks, _ = truth_ranks(index, predictions, truths)
    return {k: float(np.count_nonzero(ranks < k)) / ranks.size for k in ks}


def _run_baseline(train_matrices, eval_matrices, eval_truths, index, ks) -> BaselineResult:
    fit = orthogonal_procrustes(train_matrices.x, train_matrices.y)
    train_predictions = apply_map(train_matrices.x, fit.rotation)
    eval_predictions = apply_map(eval_matrices.x, fit.rotation)
    return BaselineResult(
        residual=fit.residual,
        train_loss=1.0 - mean_cosine(train_predictions, train_matrices.y),
        mean_cosine=mean_cosine(eval_predictions, eval_matrices.y),
        lmd_acc=_accuracy_by_k(index, eval_predictions, eval_truths, ks),
    )


# ---------------------------------------------------------------------------
# CSV


def emit_csv(result: ExperimentResult, path) -> None:
    """Write the per-epoch table plus one final ``baseline`` row.

    Header: ``epoch,train_loss,mean_cosine,lmd_acc@<k>...``; floats carry 9
    significant digits; the byte stream is deterministic.
    """
    ks = result.config.ks
    lines = ["epoch,train_loss,mean_cosine," + ",".join(f"lmd_acc@{k}" for k in ks)]
    for record in result.records:
        lines.append(
            f"{record.epoch},"
            + _render_row(record.train_loss, record.mean_cosine, record.lmd_acc, ks)
        )
    baseline = result.baseline
    lines.append(
        "baseline,"
        + _render_row(baseline.train_loss, baseline.mean_cosine, baseline.lmd_acc, ks)
    )
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _render_row(train_loss, mean_cos, lmd_acc, ks) -> str:
    values = [train_loss, mean_cos] + [lmd_acc[k] for k in ks]
    return ",".join(format(v, _CSV_FORMAT) for v in values)


def read_csv(path) -> tuple[list[MetricRecord], dict[str, float] | None]:
    """Reload an emitted CSV.

    Returns the epoch records and, when present, the baseline row as a
    column->value dict (the Procrustes residual is not stored in the CSV).
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError("empty CSV")
    header = lines[0].split(",")
    if header[:3] != ["epoch", "train_loss", "mean_cosine"]:
        raise ValueError(f"unexpected CSV header {lines[0]!r}")
    ks = []
    for column in header[3:]:
        if not column.startswith("lmd_acc@"):
            raise ValueError(f"unexpected CSV column {column!r}")
        ks.append(int(column.removeprefix("lmd_acc@")))
    if not ks:
        raise ValueError("CSV has no lmd_acc columns")

    records: list[MetricRecord] = []
    baseline: dict[str, float] | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ValueError(f"line {lineno}: {len(fields)} fields for {len(header)} columns")
        values = [float(v) for v in fields[1:]]
        if fields[0] == "baseline":
            baseline = dict(zip(header[1:], values))
        else:
            records.append(
                MetricRecord(
                    epoch=int(fields[0]),
                    train_loss=values[0],
                    mean_cosine=values[1],
                    lmd_acc=dict(zip(ks, values[2:])),
                )
            )
    return records, baseline


# ---------------------------------------------------------------------------
# SVG

_WIDTH, _HEIGHT = 640, 400
_MARGIN_LEFT, _MARGIN_RIGHT = 55, 150
_MARGIN_TOP, _MARGIN_BOTTOM = 15, 45
_Y_MAX = 1.05
_PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)


def emit_plot(result: ExperimentResult, path) -> None:
    """Render the metric curves (mean cosine and each lmd_acc@k) to SVG.

    Self-contained markup, no external references; identical results give
    identical bytes.  Needs at least two epoch records.
    """
    Path(path).write_bytes(_render_svg(result.records, result.config.ks).encode("utf-8"))


def plot_csv(csv_path, svg_path) -> None:
    """Re-render the chart for a CSV written by :func:`emit_csv`."""
    records, _baseline = read_csv(csv_path)
    if not records:
        raise ValueError("CSV holds no epoch records to plot")
    ks = tuple(records[0].lmd_acc.keys())
    Path(svg_path).write_bytes(_render_svg(records, ks).encode("utf-8"))


def _render_svg(records, ks) -> str:
    if len(records) < 2:
        raise ValueError("need at least 2 epoch records to plot")
    epochs = [record.epoch for record in records]
    series = [("mean_cosine", [record.mean_cosine for record in records])]
    for k in ks:
        series.append((f"lmd_acc@{k}", [record.lmd_acc[k] for record in records]))

    plot_width = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_height = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    x_low, x_high = epochs[0], epochs[-1]

    def sx(epoch: float) -> float:
        return _MARGIN_LEFT + (epoch - x_low) * plot_width / (x_high - x_low)

    def sy(value: float) -> float:
        clamped = min(max(value, 0.0), _Y_MAX)
        return _MARGIN_TOP + (1.0 - clamped / _Y_MAX) * plot_height

    x_axis_y = _MARGIN_TOP + plot_height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{x_axis_y}" stroke="#333333" stroke-width="1"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{x_axis_y}" x2="{_MARGIN_LEFT + plot_width}" '
        f'y2="{x_axis_y}" stroke="#333333" stroke-width="1"/>',
    ]
    for tick_value in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        y = sy(tick_value)
        parts.append(
            f'<line x1="{_MARGIN_LEFT - 4}" y1="{y:.2f}" x2="{_MARGIN_LEFT}" '
            f'y2="{y:.2f}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick_value:.1f}</text>'
        )
    for tick in _epoch_ticks(x_low, x_high):
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{x_axis_y}" x2="{x:.2f}" '
            f'y2="{x_axis_y + 4}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{x_axis_y + 17}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_LEFT + plot_width / 2:.2f}" y="{_HEIGHT - 8}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">epoch</text>'
    )
    legend_x = _MARGIN_LEFT + plot_width + 14
    for position, ((label, values), color) in enumerate(
        zip(series, _cycle_palette(len(series)))
    ):
        points = " ".join(
            f"{sx(epoch):.2f},{sy(value):.2f}" for epoch, value in zip(epochs, values)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = _MARGIN_TOP + 12 + position * 18
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y}" x2="{legend_x + 18}" '
            f'y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{legend_x + 24}" y="{legend_y + 4}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _epoch_ticks(x_low: int, x_high: int) -> list[int]:
    step = max(1, math.ceil((x_high - x_low) / 8))
    ticks = list(range(x_low, x_high + 1, step))
    if ticks[-1] != x_high:
        ticks.append(x_high)
    return ticks


def _cycle_palette(count: int) -> list[str]:
    return [_PALETTE[i % len(_PALETTE)] for i in range(count)]
