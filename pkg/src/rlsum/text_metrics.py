"""Tokenization, ROUGE-1/2/L and n-gram novelty.

All scores work on plain token sequences: lists of words or lists of
integer ids both work, as does :class:`TokenSeq`. ROUGE-L is computed at
summary level, i.e. a single LCS over the whole flattened summary. There is
no stemming and no stopword removal.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "TokenSeq",
    "RougeScore",
    "tokenize",
    "ngrams",
    "lcs_length",
    "rouge_n_f1",
    "rouge_l_f1",
    "ngram_novelty",
    "rouge_scores",
    "mean_rouge",
]

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class TokenSeq:
    """Token ids tied to the size of the vocabulary they index."""

    tokens: tuple
    vocab_size: int

    def __post_init__(self):
        toks = tuple(int(t) for t in self.tokens)
        object.__setattr__(self, "tokens", toks)
        if self.vocab_size < 1:
            raise InvalidArgumentError(f"vocab_size must be positive, got {self.vocab_size}")
        for t in toks:
            if t < 0 or t >= self.vocab_size:
                raise InvalidArgumentError(
                    f"token id {t} outside vocabulary of size {self.vocab_size}"
                )

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, idx):
        return self.tokens[idx]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and detach punctuation.

    >>> tokenize("The cat sat.")
    ['the', 'cat', 'sat', '.']
    """
    return _TOKEN_RE.findall(text.lower())


def ngrams(seq: Sequence[Hashable], n: int) -> list[tuple]:
    seq = list(seq)
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Length of the longest common subsequence, O(|a|*|b|) dynamic program."""
    a, b = list(a), list(b)
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b):
            if x == y:
                cur[j + 1] = prev[j] + 1
            else:
                cur[j + 1] = cur[j] if cur[j] > prev[j + 1] else prev[j + 1]
        prev = cur
    return prev[-1]


def rouge_n_f1(reference: Sequence[Hashable], hypothesis: Sequence[Hashable], n: int = 1) -> RougeScore:
    """Clipped n-gram overlap between ``hypothesis`` and ``reference``.

    A side shorter than ``n`` has no n-grams and its P or R is 0.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    ref = Counter(ngrams(reference, n))
    hyp = Counter(ngrams(hypothesis, n))
    overlap = sum((ref & hyp).values())
    n_hyp = sum(hyp.values())
    n_ref = sum(ref.values())
    precision = overlap / n_hyp if n_hyp else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    return RougeScore.from_pr(precision, recall)


def rouge_l_f1(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> RougeScore:
    """Summary-level ROUGE-L; an empty side scores 0."""
    if len(reference) == 0 or len(hypothesis) == 0:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(reference, hypothesis)
    return RougeScore.from_pr(lcs / len(hypothesis), lcs / len(reference))


def ngram_novelty(source: Sequence[Hashable], summary: Sequence[Hashable], n: int = 1) -> float:
    """Fraction of the summary's unique n-grams that never occur in the source."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    summ = set(ngrams(summary, n))
    if not summ:
        return 0.0
    src = set(ngrams(source, n))
    return len(summ - src) / len(summ)


def rouge_scores(reference, hypothesis) -> dict[str, float]:
    """ROUGE-1/2/L F1 as a dict, the shape used by reports."""
    return {
        "rouge1": rouge_n_f1(reference, hypothesis, 1).f1,
        "rouge2": rouge_n_f1(reference, hypothesis, 2).f1,
        "rougeL": rouge_l_f1(reference, hypothesis).f1,
    }


def mean_rouge(references, hypotheses) -> dict[str, float]:
    if len(references) != len(hypotheses):
        raise InvalidArgumentError("references and hypotheses differ in length")
    rows = [rouge_scores(r, h) for r, h in zip(references, hypotheses)]
    return {k: float(np.mean([row[k] for row in rows])) for k in ("rouge1", "rouge2", "rougeL")}
