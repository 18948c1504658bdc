"""Acceptance suite: ten end-to-end checks, one [PASS]/[FAIL] line each.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines as they print
(without ``-s`` pytest captures them and shows them only on failure).  The
checks are ordered cheap-to-expensive; the two training-curve checks share
one module-scoped CBOW pipeline and together take about a minute.
"""

import math
import time

import numpy as np
import pytest

from lmdalign.cbow import CbowConfig, train_cbow
from lmdalign.embeddings import EmbeddingSpace, Vocabulary, normalize_rows
from lmdalign.experiments import ExperimentConfig, emit_csv, emit_plot, run_experiment
from lmdalign.lexicon import BilingualLexicon, filter_by_vocab
from lmdalign.mapper import MapperConfig, grad_check, init_mapper
from lmdalign.metrics import (
    NeighborIndex,
    knn,
    lmd_accuracy,
    mean_cosine,
    rolling_ols_slope,
)
from lmdalign.procrustes import orthogonal_procrustes, svd


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. closed-form fit recovers a planted orthogonal map


def test_01_orthogonal_fit_recovers_planted_rotations():
    rng = np.random.default_rng(2001)
    start = time.perf_counter()
    worst_map = 0.0
    worst_residual = 0.0
    for _ in range(20):
        x = rng.standard_normal((50, 10))
        planted, _ = np.linalg.qr(rng.standard_normal((10, 10)))
        fit = orthogonal_procrustes(x, x @ planted)
        worst_map = max(worst_map, float(np.linalg.norm(fit.rotation - planted)))
        worst_residual = max(worst_residual, fit.residual)
    elapsed = time.perf_counter() - start
    report(
        "01 planted-rotation recovery",
        worst_map < 1e-8 and worst_residual < 1e-8 and elapsed < 1.0,
        f"max |R-R0|_F={worst_map:.3g} (<1e-8), max residual={worst_residual:.3g}"
        f" (<1e-8), {elapsed:.2f}s (<1s)",
    )


# ---------------------------------------------------------------------------
# 2. decomposition validity on random matrices, spectrum cross-checked
#    against an independently written symmetric eigensolver


def eigenvalues_symmetric_jacobi(matrix, sweeps=100, tol=1e-14):
    """Eigenvalues of a symmetric matrix by classic two-sided Jacobi."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off = max(off, abs(a[i, j]))
                if abs(a[i, j]) <= tol * scale:
                    continue
                phi = 0.5 * math.atan2(2.0 * a[i, j], a[j, j] - a[i, i])
                c, s = math.cos(phi), math.sin(phi)
                rotation = np.eye(n)
                rotation[i, i] = rotation[j, j] = c
                rotation[i, j] = s
                rotation[j, i] = -s
                a = rotation.T @ a @ rotation
        if off <= tol * scale:
            break
    return np.sort(np.diag(a))[::-1]


def singular_values_oracle(matrix):
    m = np.asarray(matrix, dtype=np.float64)
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    return np.sqrt(np.clip(eigenvalues_symmetric_jacobi(gram), 0.0, None))


def test_02_svd_reconstruction_orthonormality_and_spectrum():
    # The Gram-matrix oracle loses absolute accuracy near sigma = 0 (forming
    # M^T M squares the conditioning), so the fixed seed matters: it was
    # checked to keep every draw's smallest singular value above 1e-3, where
    # the oracle is still good to ~1e-10.
    rng = np.random.default_rng(2002)
    start = time.perf_counter()
    worst_recon = 0.0
    worst_orth = 0.0
    worst_sigma = 0.0
    smallest_sigma = np.inf
    for _ in range(50):
        rows = int(rng.integers(1, 41))
        cols = int(rng.integers(1, 41))
        m = rng.standard_normal((rows, cols))
        result = svd(m)
        rebuilt = result.u @ np.diag(result.singular_values) @ result.v.T
        worst_recon = max(
            worst_recon,
            float(np.linalg.norm(rebuilt - m)) / max(1.0, float(np.linalg.norm(m))),
        )
        r = result.u.shape[1]
        worst_orth = max(
            worst_orth,
            float(np.linalg.norm(result.u.T @ result.u - np.eye(r))),
            float(np.linalg.norm(result.v.T @ result.v - np.eye(r))),
        )
        oracle = singular_values_oracle(m)
        worst_sigma = max(
            worst_sigma, float(np.max(np.abs(result.singular_values - oracle)))
        )
        smallest_sigma = min(smallest_sigma, float(result.singular_values[-1]))
    elapsed = time.perf_counter() - start
    report(
        "02 decomposition validity",
        worst_recon < 1e-9
        and worst_orth < 1e-10
        and worst_sigma < 1e-9
        and elapsed < 5.0,
        f"max recon={worst_recon:.3g} (<1e-9 rel), max orth defect={worst_orth:.3g}"
        f" (<1e-10), max sigma err={worst_sigma:.3g} (<1e-9, oracle margin: min"
        f" sigma={smallest_sigma:.3g}), {elapsed:.2f}s (<5s)",
    )


# ---------------------------------------------------------------------------
# 3. analytic gradients agree with central differences


def test_03_mapper_gradients_match_central_differences():
    rng = np.random.default_rng(2003)
    start = time.perf_counter()
    worst = 0.0
    shapes = [(6, 5, 0), (4, 7, 0), (5, 5, 8), (7, 3, 8), (3, 6, 8)]
    for position, (d_in, d_out, hidden) in enumerate(shapes):
        config = MapperConfig(d_in=d_in, d_out=d_out, hidden=hidden, seed=300 + position)
        mapper = init_mapper(config)
        for _ in range(3):
            x = rng.standard_normal(d_in)
            y = rng.standard_normal(d_out)
            worst = max(worst, grad_check(mapper, (x, y), epsilon=1e-6))
    elapsed = time.perf_counter() - start
    report(
        "03 gradient correctness",
        worst < 1e-4 and elapsed < 5.0,
        f"max rel err={worst:.3g} (<1e-4 at eps=1e-6, {len(shapes)} configs),"
        f" {elapsed:.2f}s (<5s)",
    )


# ---------------------------------------------------------------------------
# 4. metric identities: perfect predictions, monotonicity in k, and the
#    retrieval path against a full-sort oracle


def full_sort_oracle(index: NeighborIndex, query, k: int) -> tuple[int, ...]:
    scores = index.cosine_scores(query)
    ranked = sorted(
        ((-float(scores[pos]), int(cid)) for pos, cid in enumerate(index.candidate_ids))
    )
    return tuple(cid for _, cid in ranked[:k])


def random_space(rng, count, dim, prefix="w"):
    vocab = Vocabulary(tuple(f"{prefix}{i}" for i in range(count)))
    return EmbeddingSpace(vocab, rng.standard_normal((count, dim)))


def test_04_metric_identities_monotonicity_knn_oracle():
    rng = np.random.default_rng(2004)

    space = random_space(rng, 40, 8)
    index = NeighborIndex(space)
    truths = list(space.vocab.tokens)
    identity_accs = [lmd_accuracy(index, space.matrix, truths, k) for k in (1, 2, 3, 5, 40)]
    identity_ok = all(acc == 1.0 for acc in identity_accs)
    cosine_exact = mean_cosine(space.matrix, space.matrix) == 1.0

    monotone_ok = True
    for _ in range(100):
        predictions = rng.standard_normal((15, 8))
        chosen = [space.vocab.tokens[int(t)] for t in rng.integers(0, 40, size=15)]
        accs = [lmd_accuracy(index, predictions, chosen, k) for k in range(1, 41)]
        monotone_ok = monotone_ok and all(a <= b for a, b in zip(accs, accs[1:]))

    big = NeighborIndex(random_space(rng, 200, 12))
    oracle_ok = True
    for _ in range(30):
        query = rng.standard_normal(12)
        for k in (1, 5, 17, 200):
            oracle_ok = oracle_ok and knn(big, query, k).indices == full_sort_oracle(
                big, query, k
            )

    report(
        "04 metric identities",
        identity_ok and cosine_exact and monotone_ok and oracle_ok,
        f"identity acc all 1.0: {identity_ok}, mean cosine exactly 1.0:"
        f" {cosine_exact}, monotone over 100 sets: {monotone_ok}, matches"
        f" full-sort oracle on 200 words: {oracle_ok}",
    )


# ---------------------------------------------------------------------------
# 5. random predictions score at chance


def test_05_random_predictions_score_at_chance():
    rng = np.random.default_rng(2005)
    count, dim, trials = 50, 16, 2000
    index = NeighborIndex(random_space(rng, count, dim))
    predictions = rng.standard_normal((trials, dim))
    predictions /= np.linalg.norm(predictions, axis=1, keepdims=True)
    truths = [f"w{int(t)}" for t in rng.integers(0, count, size=trials)]
    details = []
    ok = True
    for k in (1, 5, 10):
        acc = lmd_accuracy(index, predictions, truths, k)
        p = k / count
        sigma = math.sqrt(p * (1.0 - p) / trials)
        ok = ok and abs(acc - p) <= 3.0 * sigma
        details.append(f"k={k}: {acc:.4f} vs {p:.2f}+-{3 * sigma:.4f}")
    report("05 chance-level sanity", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 6/7/9. training curves on a synthetic bilingual task.  The two "languages"
# realize one seeded random walk over a 500-word successor graph, so every
# word has an exact translation; the two CBOW models use different context
# windows, which keeps neighborhoods aligned without making the two spaces
# globally isometric.  All seeds below are load-bearing and frozen.

WORD_PAIRS = 500
SENTENCES = 6000


def parallel_walk_corpus():
    graph_rng = np.random.default_rng(55)
    successors = {}
    for i in range(WORD_PAIRS):
        extra = graph_rng.integers(0, WORD_PAIRS, size=3)
        successors[i] = [(i + 1) % WORD_PAIRS] + [int(e) for e in extra]
    weights = (np.arange(WORD_PAIRS) + 2.0) ** -0.7
    weights /= weights.sum()
    rng = np.random.default_rng(101)
    src_lines, tgt_lines = [], []
    for _ in range(SENTENCES):
        length = int(rng.integers(6, 13))
        word = int(rng.choice(WORD_PAIRS, p=weights))
        ids = [word]
        for _ in range(length - 1):
            if rng.random() < 0.10:
                word = int(rng.choice(WORD_PAIRS, p=weights))
            else:
                word = successors[word][int(rng.integers(0, 4))]
            ids.append(word)
        src_lines.append(" ".join(f"es{i}" for i in ids))
        tgt_lines.append(" ".join(f"en{i}" for i in ids))
    return src_lines, tgt_lines


def in_sample_config():
    return ExperimentConfig(
        mode="in_sample",
        mapper=MapperConfig(
            d_in=48, d_out=48, hidden=256, lr=0.1, batch_size=32, epochs=200, seed=7
        ),
        ks=(1, 5),
        train_fraction=0.8,
        split_seed=0,
        normalize=True,
    )


def full_pipeline(out_dir):
    """Corpus through CBOW, mapper training, and CSV/SVG emission."""
    src_lines, tgt_lines = parallel_walk_corpus()
    source, _ = train_cbow(
        src_lines,
        CbowConfig(dim=48, window=4, negatives=5, epochs=5, initial_lr=0.05,
                   min_count=5, seed=11),
    )
    target, _ = train_cbow(
        tgt_lines,
        CbowConfig(dim=48, window=3, negatives=5, epochs=5, initial_lr=0.05,
                   min_count=5, seed=22),
    )
    lexicon = BilingualLexicon(tuple((f"es{i}", f"en{i}") for i in range(WORD_PAIRS)))
    result = run_experiment(source, target, lexicon, in_sample_config())
    csv_path, svg_path = out_dir / "curve.csv", out_dir / "curve.svg"
    emit_csv(result, csv_path)
    emit_plot(result, svg_path)
    return source, target, lexicon, result, csv_path.read_bytes(), svg_path.read_bytes()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    start = time.perf_counter()
    parts = full_pipeline(tmp_path_factory.mktemp("pipeline_a"))
    return parts + (time.perf_counter() - start,)


def test_06_in_sample_curves_separate_retrieval_from_cosine(pipeline):
    source, target, lexicon, result, _, _, elapsed = pipeline
    usable, _ = filter_by_vocab(lexicon, source, target)
    final = result.records[-1]
    scale_ok = SENTENCES >= 5000 and len(usable) >= 300
    report(
        "06 in-sample exact match vs cosine",
        scale_ok and final.lmd_acc[1] >= 0.9 and final.mean_cosine <= 0.99,
        f"{SENTENCES} sentences/side, {len(usable)} usable pairs, final"
        f" lmd_acc@1={final.lmd_acc[1]:.4f} (>=0.9), final mean_cosine="
        f"{final.mean_cosine:.4f} (<=0.99), {elapsed:.0f}s",
    )


def test_07_held_out_gap_and_cosine_correlation(pipeline):
    source, target, lexicon, in_sample_result, _, _, _ = pipeline
    config = in_sample_config()
    held_out = ExperimentConfig(
        mode="held_out",
        mapper=config.mapper,
        ks=config.ks,
        train_fraction=config.train_fraction,
        split_seed=config.split_seed,
        normalize=config.normalize,
    )
    result = run_experiment(source, target, lexicon, held_out)
    test_acc = result.records[-1].lmd_acc[1]
    train_acc = in_sample_result.records[-1].lmd_acc[1]
    acc_series = [record.lmd_acc[1] for record in result.records]
    cosine_series = [record.mean_cosine for record in result.records]
    correlation = float(np.corrcoef(acc_series, cosine_series)[0, 1])
    report(
        "07 held-out gap and correlation",
        test_acc < train_acc and correlation > 0.0,
        f"test lmd_acc@1={test_acc:.4f} < in-sample {train_acc:.4f}, Pearson"
        f"(test acc, test cosine)={correlation:.3f} (>0)",
    )


# ---------------------------------------------------------------------------
# 8. rolling OLS slope


def test_08_rolling_ols_slope_exact_on_lines():
    line = [(float(x), 2.0 * x) for x in range(1, 21)]
    slope_errs = [
        abs(slope - 2.0)
        for window in (2, 5, 9)
        for slope in rolling_ols_slope(line, window)
    ]
    rng = np.random.default_rng(2008)
    xs = np.cumsum(rng.uniform(0.5, 1.5, size=30))
    ys = rng.standard_normal(30)
    series = list(zip(xs.tolist(), ys.tolist()))
    paired = rolling_ols_slope(series, 2)
    quotients = [
        (y2 - y1) / (x2 - x1) for (x1, y1), (x2, y2) in zip(series, series[1:])
    ]
    quotient_err = max(abs(a - b) for a, b in zip(paired, quotients))
    report(
        "08 rolling OLS slope",
        max(slope_errs) < 1e-9 and quotient_err < 1e-12,
        f"line slope err={max(slope_errs):.3g} (<1e-9, windows 2/5/9), window-2"
        f" vs difference quotients err={quotient_err:.3g}",
    )


# ---------------------------------------------------------------------------
# 9. repeating the whole pipeline reproduces the artifacts byte for byte


def test_09_pipeline_reruns_byte_identical(pipeline, tmp_path):
    _, _, _, _, first_csv, first_svg, _ = pipeline
    _, _, _, _, second_csv, second_svg = full_pipeline(tmp_path)[:6]
    report(
        "09 pipeline determinism",
        first_csv == second_csv and first_svg == second_svg,
        f"CSV identical: {first_csv == second_csv} ({len(first_csv)} bytes),"
        f" SVG identical: {first_svg == second_svg} ({len(first_svg)} bytes)",
    )


# ---------------------------------------------------------------------------
# 10. CBOW sanity on a corpus of interchangeable word pairs: the members of
# each pair only ever appear inside the same two-token frame "c_i _ d_i",
# so they are distributionally identical and must end up nearest neighbors.


def test_10_cbow_pair_mates_are_top_neighbors():
    rng = np.random.default_rng(401)
    n_pairs, n_lines = 6, 1800
    lines = []
    for _ in range(n_lines):
        i = int(rng.integers(0, n_pairs))
        word = f"a{i}" if rng.integers(0, 2) == 0 else f"b{i}"
        lines.append(f"c{i} {word} d{i}")
    config = CbowConfig(
        dim=16, window=5, negatives=5, epochs=10, initial_lr=0.05, min_count=1, seed=1
    )
    space, losses = train_cbow(lines, config)
    unit, _ = normalize_rows(space)
    sims = unit.matrix @ unit.matrix.T
    hits = 0
    worst_margin = np.inf
    for i in range(n_pairs):
        for token, partner in ((f"a{i}", f"b{i}"), (f"b{i}", f"a{i}")):
            row = sims[unit.vocab.position(token)].copy()
            row[unit.vocab.position(token)] = -np.inf
            best = int(np.argmax(row))
            hits += best == unit.vocab.position(partner)
            others = np.delete(row, best)
            worst_margin = min(worst_margin, float(row[best] - np.max(others)))
    loss_ok = losses[1] <= losses[0]
    report(
        "10 CBOW pair-mate neighbors",
        hits == 2 * n_pairs and loss_ok,
        f"partner is top neighbor for {hits}/{2 * n_pairs} tokens (margin"
        f" {worst_margin:+.3f}), first-two-epoch loss non-increasing: {loss_ok}"
        f" ({losses[0]:.4f} -> {losses[1]:.4f})",
    )
