"""Tokenization, vocabulary counting, negative-sampling table, CBOW training."""

from collections import Counter

import numpy as np
import pytest

from lmdalign.cbow import (
    CbowConfig,
    UnigramTable,
    build_vocab,
    sample_negative,
    tokenize,
    train_cbow,
)
from lmdalign.seeding import generator


class TestTokenize:
    @pytest.mark.parametrize(
        "line, expected",
        [
            ("The cat sat.", ["the", "cat", "sat"]),
            ('"¿Qué pasa?" dijo.', ["qué", "pasa", "dijo"]),
            ("(hello)  [world]", ["hello", "world"]),
            ("A.B. rocks", ["a.b", "rocks"]),
            ("don't stop", ["don't", "stop"]),
            ("", []),
            ("   \t  ", []),
            ("... !!! ???", []),
            ("uno,\tdos;\ntres!", ["uno", "dos", "tres"]),
        ],
    )
    def test_frozen_examples(self, line, expected):
        assert tokenize(line) == expected

    def test_interior_punctuation_survives(self):
        """Only edge punctuation is stripped, so hyphens and inner dots stay."""
        assert tokenize("co-occur e.g. 'quoted'") == ["co-occur", "e.g", "quoted"]


class TestBuildVocab:
    def test_matches_counter_oracle(self):
        """Counts agree with collections.Counter over the tokenized corpus."""
        corpus = [
            "el perro come. El gato duerme.",
            "¿el perro corre? sí, el perro corre.",
            "la casa es grande",
        ]
        oracle = Counter()
        for line in corpus:
            oracle.update(tokenize(line))
        vocab, counts = build_vocab(corpus, min_count=1)
        assert len(vocab) == len(oracle)
        for token, n in oracle.items():
            assert counts[vocab.position(token)] == n

    def test_order_count_desc_then_alpha(self):
        vocab, counts = build_vocab(["b a b", "a b c"], min_count=1)
        assert vocab.tokens == ("b", "a", "c")
        assert counts.tolist() == [3, 2, 1]

    def test_min_count_filters(self):
        vocab, counts = build_vocab(["b a b", "a b c"], min_count=2)
        assert vocab.tokens == ("b", "a")
        assert counts.tolist() == [3, 2]

    def test_no_surviving_token_raises(self):
        with pytest.raises(ValueError, match="min_count"):
            build_vocab(["a b c"], min_count=5)

    def test_min_count_below_one_rejected(self):
        with pytest.raises(ValueError):
            build_vocab(["a a"], min_count=0)


class TestUnigramTable:
    def test_alpha_one_matches_frequency_ratio(self):
        """With alpha=1 a 3:1 count ratio must reproduce p=0.75 within noise."""
        table = UnigramTable(np.array([3.0, 1.0]), alpha=1.0)
        draws = table.sample_many(generator(42), 100_000)
        p_hat = float(np.mean(draws == 0))
        assert abs(p_hat - 0.75) < 0.01

    def test_alpha_zero_is_uniform_over_seen_tokens(self):
        table = UnigramTable(np.array([10.0, 1.0, 1.0]), alpha=0.0)
        draws = table.sample_many(generator(43), 90_000)
        for idx in range(3):
            assert abs(float(np.mean(draws == idx)) - 1 / 3) < 0.01

    def test_default_alpha_flattens_ratio(self):
        """alpha=0.75 turns 3:1 counts into 3^0.75 : 1 sampling odds."""
        table = UnigramTable(np.array([3.0, 1.0]))
        expected = 3**0.75 / (3**0.75 + 1.0)
        draws = table.sample_many(generator(44), 100_000)
        assert abs(float(np.mean(draws == 0)) - expected) < 0.01

    def test_zero_count_token_never_drawn(self):
        table = UnigramTable(np.array([2.0, 0.0, 3.0]))
        draws = table.sample_many(generator(45), 10_000)
        assert not np.any(draws == 1)

    def test_single_draw_in_range(self):
        table = UnigramTable(np.array([1.0, 1.0, 1.0]))
        rng = generator(46)
        for _ in range(50):
            assert 0 <= sample_negative(table, rng) < 3

    def test_same_seed_same_draws(self):
        table = UnigramTable(np.array([5.0, 2.0, 1.0]))
        a = table.sample_many(generator(47), 1000)
        b = table.sample_many(generator(47), 1000)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize(
        "freqs, alpha",
        [
            (np.array([]), 0.75),
            (np.array([[1.0]]), 0.75),
            (np.array([-1.0, 2.0]), 0.75),
            (np.array([np.inf, 1.0]), 0.75),
            (np.array([1.0, 1.0]), -0.5),
            (np.array([0.0, 0.0]), 0.75),
        ],
    )
    def test_invalid_inputs_rejected(self, freqs, alpha):
        with pytest.raises(ValueError):
            UnigramTable(freqs, alpha=alpha)


def slot_pair_corpus(n_pairs=4, n_lines=1200, seed=401):
    """Pairs (a_i, b_i) fill the same slot of a per-pair template c_i _ d_i.

    Slot mates share their whole context distribution, which is what drives
    input vectors together; ``judge`` checks they end up mutual top neighbors.
    """
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(n_lines):
        i = int(rng.integers(n_pairs))
        w = ("a" if rng.random() < 0.5 else "b") + str(i)
        lines.append(f"c{i} {w} d{i}")
    return lines


class TestTrainCbow:
    def test_bit_deterministic(self):
        corpus = slot_pair_corpus(n_pairs=2, n_lines=200)
        cfg = CbowConfig(dim=8, window=2, negatives=3, epochs=2, initial_lr=0.05, min_count=1, seed=9)
        space_a, losses_a = train_cbow(corpus, cfg)
        space_b, losses_b = train_cbow(corpus, cfg)
        assert space_a.matrix.tobytes() == space_b.matrix.tobytes()
        assert losses_a == losses_b

    def test_loss_non_increasing_early(self):
        corpus = slot_pair_corpus()
        cfg = CbowConfig(dim=16, window=5, negatives=5, epochs=3, initial_lr=0.05, min_count=1, seed=1)
        _, losses = train_cbow(corpus, cfg)
        assert len(losses) == 3
        assert losses[1] <= losses[0]

    def test_slot_mates_become_top_neighbors(self):
        """Words sharing a template slot end up each other's nearest neighbor."""
        n_pairs = 4
        corpus = slot_pair_corpus(n_pairs=n_pairs)
        cfg = CbowConfig(dim=16, window=5, negatives=5, epochs=10, initial_lr=0.05, min_count=1, seed=1)
        space, _ = train_cbow(corpus, cfg)
        m = space.matrix / np.linalg.norm(space.matrix, axis=1, keepdims=True)
        sims = m @ m.T
        for i in range(n_pairs):
            for token, partner in ((f"a{i}", f"b{i}"), (f"b{i}", f"a{i}")):
                pos = space.vocab.position(token)
                row = sims[pos].copy()
                row[pos] = -2.0
                assert space.vocab.tokens[int(np.argmax(row))] == partner

    def test_direct_cooccurrence_does_not_imply_similarity(self):
        """Adjacent words are not pulled together; slot sharing is what counts."""
        rng = np.random.default_rng(500)
        lines = []
        for _ in range(800):
            i = int(rng.integers(3))
            x, y = (f"a{i}", f"b{i}") if rng.random() < 0.5 else (f"b{i}", f"a{i}")
            lines.append(f"c{i} {x} d{i} {y}")
        cfg = CbowConfig(dim=16, window=5, negatives=5, epochs=10, initial_lr=0.05, min_count=1, seed=1)
        space, _ = train_cbow(lines, cfg)
        m = space.matrix / np.linalg.norm(space.matrix, axis=1, keepdims=True)
        sims = m @ m.T
        pa, pb = space.vocab.position("a0"), space.vocab.position("b0")
        pc = space.vocab.position("c0")
        assert sims[pa, pb] < sims[pa, pc]

    def test_short_sentences_skipped(self):
        """One-word lines carry no (context, center) pair and are ignored."""
        corpus = ["solo"] * 50 + slot_pair_corpus(n_pairs=2, n_lines=100)
        cfg = CbowConfig(dim=4, window=2, negatives=2, epochs=1, initial_lr=0.05, min_count=1, seed=2)
        space, losses = train_cbow(corpus, cfg)
        assert "solo" in space.vocab
        assert len(losses) == 1 and np.isfinite(losses[0])

    def test_all_sentences_too_short_raises(self):
        with pytest.raises(ValueError, match="two in-vocabulary"):
            train_cbow(["uno", "dos", "tres"], CbowConfig(dim=4, min_count=1))

    def test_min_count_can_empty_a_sentence(self):
        """A line whose rare words fall below min_count stops being trainable."""
        corpus = ["x y"] + ["p q"] * 10
        cfg = CbowConfig(dim=4, window=2, negatives=2, epochs=1, initial_lr=0.05, min_count=5, seed=3)
        space, _ = train_cbow(corpus, cfg)
        assert "x" not in space.vocab and "p" in space.vocab

    def test_single_token_vocab_trains(self):
        """Negatives equal to the center are dropped, even when unavoidable."""
        corpus = ["eco eco eco"] * 30
        cfg = CbowConfig(dim=4, window=2, negatives=3, epochs=2, initial_lr=0.05, min_count=1, seed=4)
        space, losses = train_cbow(corpus, cfg)
        assert len(space.vocab) == 1
        assert all(np.isfinite(x) for x in losses)

    def test_space_shape_and_epoch_count(self):
        corpus = slot_pair_corpus(n_pairs=2, n_lines=150)
        cfg = CbowConfig(dim=12, window=3, negatives=4, epochs=4, initial_lr=0.05, min_count=1, seed=5)
        space, losses = train_cbow(corpus, cfg)
        assert space.dim == 12 and len(losses) == 4
        assert len(space.vocab) == 8  # a0 a1 b0 b1 c0 c1 d0 d1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dim": 0},
            {"window": 0},
            {"negatives": 0},
            {"epochs": 0},
            {"min_count": 0},
            {"initial_lr": 0.0},
            {"initial_lr": float("nan")},
            {"seed": -1},
            {"seed": 2**64},
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            CbowConfig(**kwargs)
