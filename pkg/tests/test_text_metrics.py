import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rlsum.errors import InvalidArgumentError
from rlsum.text_metrics import (
    RougeScore,
    TokenSeq,
    lcs_length,
    ngram_novelty,
    rouge_l_f1,
    rouge_n_f1,
    tokenize,
)

from oracles import brute_lcs, brute_novelty, brute_rouge_l_f1

seqs = st.lists(st.integers(0, 9), max_size=12)


@pytest.mark.parametrize("text,expected", [
    ("The cat sat.", ["the", "cat", "sat", "."]),
    ("", []),
    ("A, b", ["a", ",", "b"]),
    ("  Mixed\tCASE\nlines ", ["mixed", "case", "lines"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_token_seq_rejects_out_of_range_ids():
    assert len(TokenSeq((0, 3, 4), 5)) == 3
    with pytest.raises(InvalidArgumentError):
        TokenSeq((0, 5), 5)
    assert len(TokenSeq((), 5)) == 0


def test_rouge_score_f1_definition():
    assert RougeScore.from_pr(0.0, 0.0).f1 == 0.0
    s = RougeScore.from_pr(1.0, 2 / 3)
    assert s.f1 == pytest.approx(0.8, abs=1e-12)


class TestRougeN:
    def test_hand_count(self):
        s = rouge_n_f1(["the", "cat", "sat"], ["the", "cat"], 1)
        assert s.precision == 1.0
        assert s.recall == pytest.approx(2 / 3)
        assert s.f1 == pytest.approx(0.8, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_identity(self, n):
        seq = ["a", "b", "c", "a"]
        assert rouge_n_f1(seq, seq, n).f1 == 1.0

    def test_disjoint(self):
        assert rouge_n_f1(["a", "b"], ["c", "d"], 1).f1 == 0.0

    def test_clipped_counts(self):
        s = rouge_n_f1(["a", "b"], ["a", "a", "a"], 1)
        assert s.precision == pytest.approx(1 / 3)
        assert s.recall == pytest.approx(1 / 2)

    def test_short_side_contributes_nothing(self):
        s = rouge_n_f1(["a", "b", "c"], ["a"], 2)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    def test_n_zero_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rouge_n_f1(["a"], ["a"], 0)

    @given(seqs, seqs, st.integers(1, 3))
    def test_precision_recall_swap(self, a, b, n):
        assert rouge_n_f1(a, b, n).precision == rouge_n_f1(b, a, n).recall


class TestRougeL:
    def test_hand_example(self):
        assert rouge_l_f1(["the", "cat", "sat"], ["the", "cat"]).f1 == pytest.approx(0.8, abs=1e-12)

    def test_reordered(self):
        s = rouge_l_f1(list("abcd"), list("bda"))
        assert s.precision == pytest.approx(2 / 3)
        assert s.recall == pytest.approx(1 / 2)
        assert s.f1 == pytest.approx(4 / 7, abs=1e-12)

    def test_empty_sides(self):
        assert rouge_l_f1([], ["a"]).f1 == 0.0
        assert rouge_l_f1(["a"], []).f1 == 0.0

    @given(st.lists(st.integers(0, 9), min_size=1, max_size=12))
    def test_identity(self, a):
        assert rouge_l_f1(a, a).f1 == 1.0

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            a = list(rng.integers(0, 10, rng.integers(0, 13)))
            b = list(rng.integers(0, 10, rng.integers(0, 13)))
            assert rouge_l_f1(a, b).f1 == brute_rouge_l_f1(a, b)


class TestLCS:
    def test_examples(self):
        assert lcs_length(list("abcd"), list("bda")) == 2
        assert lcs_length(list("abc"), list("abc")) == 3
        assert lcs_length([], list("abc")) == 0
        assert lcs_length(list("abc"), []) == 0

    @given(seqs, seqs)
    def test_symmetric_and_bounded(self, a, b):
        n = lcs_length(a, b)
        assert n == lcs_length(b, a)
        assert n <= min(len(a), len(b))

    @settings(max_examples=200)
    @given(seqs, seqs)
    def test_matches_enumeration(self, a, b):
        assert lcs_length(a, b) == brute_lcs(a, b)


class TestNovelty:
    def test_copied_summary(self):
        src = ["a", "b", "c", "d"]
        for n in (1, 2, 3):
            assert ngram_novelty(src, src[1:4], n) == 0.0

    def test_disjoint_unigrams(self):
        assert ngram_novelty(["a", "b"], ["x", "y"], 1) == 1.0

    def test_hand_enumeration(self):
        assert ngram_novelty(["a", "b", "c"], ["a", "b", "x"], 2) == 0.5

    def test_short_summary(self):
        assert ngram_novelty(["a"], ["x"], 2) == 0.0

    def test_n_zero_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ngram_novelty(["a"], ["a"], 0)

    @given(seqs, seqs, st.integers(1, 3))
    def test_matches_brute_force(self, src, summ, n):
        assert ngram_novelty(src, summ, n) == brute_novelty(src, summ, n)

    @given(seqs, st.lists(st.integers(0, 9), min_size=3, max_size=8), st.integers(1, 3))
    def test_adding_summary_to_source_clears_novelty(self, src, summ, n):
        assert ngram_novelty(src + [99] + summ, summ, n) == 0.0
