"""Corpora: a synthetic summarization task, JSONL ingestion, vocabularies, splits.

The synthetic task gives exact control over what a perfect summary is:

``lead_k``
    the first ``k`` source tokens
``keyword_extract``
    the source tokens drawn from a designated keyword subset, in order
``sorted_unique``
    the distinct source tokens sorted by id

Paraphrase noise replaces a summary keyword, with probability
``noise_rate``, by one of its synonyms. Synonyms never occur in sources, so
noise shows up as novel n-grams in the references.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .model import RESERVED, UNK
from .text_metrics import TokenSeq, tokenize

log = logging.getLogger(__name__)

RULES = ("lead_k", "keyword_extract", "sorted_unique")
MAX_SOURCE_TOKENS = 64
MAX_TARGET_TOKENS = 16
FEW_SHOT_TRAIN = 1000


@dataclass(frozen=True)
class Example:
    source: tuple
    summary: tuple
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "summary", tuple(self.summary))
        if not self.source or not self.summary:
            raise InvalidArgumentError(f"example {self.id!r}: source and summary must be non-empty")


@dataclass(frozen=True)
class SyntheticTaskSpec:
    rule: str = "keyword_extract"
    vocab_size: int = 36
    n_keywords: int = 10
    source_len: tuple = (8, 20)
    k: int = 3
    keyword_rate: float = 0.3
    noise_rate: float = 0.0
    n_synonyms: int = 1
    max_target_tokens: int = MAX_TARGET_TOKENS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "source_len", tuple(self.source_len))
        lo, hi = self.source_len
        if self.rule not in RULES:
            raise InvalidArgumentError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.vocab_size < 2:
            raise InvalidArgumentError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not (1 <= lo <= hi <= MAX_SOURCE_TOKENS):
            raise InvalidArgumentError(f"source_len must satisfy 1 <= min <= max <= {MAX_SOURCE_TOKENS}, got {self.source_len}")
        if not (0 <= self.noise_rate < 0.5):
            raise InvalidArgumentError(f"noise_rate must lie in [0, 0.5), got {self.noise_rate}")
        if self.rule == "keyword_extract" and not (1 <= self.n_keywords <= self.vocab_size):
            raise InvalidArgumentError(f"n_keywords must lie in [1, vocab_size], got {self.n_keywords}")
        if self.rule == "keyword_extract" and not (0 < self.keyword_rate <= 1):
            raise InvalidArgumentError(f"keyword_rate must lie in (0, 1], got {self.keyword_rate}")
        if self.rule == "lead_k" and not (1 <= self.k <= lo):
            raise InvalidArgumentError(f"k must lie in [1, min source length], got {self.k}")
        if self.n_synonyms < 1:
            raise InvalidArgumentError(f"n_synonyms must be >= 1, got {self.n_synonyms}")
        if self.max_target_tokens < 1:
            raise InvalidArgumentError("max_target_tokens must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticTaskSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["source_len"] = list(self.source_len)
        return d

    def word(self, i: int) -> str:
        return f"w{i:03d}"

    def synonyms(self, i: int) -> list[str]:
        """Paraphrase tokens for content word ``i``; only keywords have them."""
        if i >= self._n_paraphrasable:
            return []
        return [f"s{i:03d}{chr(ord('a') + j)}" for j in range(self.n_synonyms)]

    @property
    def _n_paraphrasable(self) -> int:
        return self.n_keywords if self.rule == "keyword_extract" else min(self.n_keywords, self.vocab_size)


def _draw_source(spec: SyntheticTaskSpec, rng: np.random.Generator) -> list[int]:
    length = int(rng.integers(spec.source_len[0], spec.source_len[1] + 1))
    if spec.rule != "keyword_extract":
        return [int(t) for t in rng.integers(0, spec.vocab_size, size=length)]
    others = spec.vocab_size - spec.n_keywords
    ids = []
    for _ in range(length):
        if others == 0 or rng.random() < spec.keyword_rate:
            ids.append(int(rng.integers(0, spec.n_keywords)))
        else:
            ids.append(int(spec.n_keywords + rng.integers(0, others)))
    if not any(i < spec.n_keywords for i in ids):
        ids[int(rng.integers(0, length))] = int(rng.integers(0, spec.n_keywords))
    return ids


def rule_summary(spec: SyntheticTaskSpec, source_ids: Sequence[int]) -> list[int]:
    """The noise-free summary the rule prescribes for ``source_ids``."""
    if spec.rule == "lead_k":
        out = list(source_ids[:spec.k])
    elif spec.rule == "keyword_extract":
        out = [i for i in source_ids if i < spec.n_keywords]
    else:
        out = sorted(set(source_ids))
    return out[:spec.max_target_tokens]


def generate_synthetic(spec: SyntheticTaskSpec, n_examples: int) -> list[Example]:
    """``n_examples`` examples, fully determined by ``spec.seed``."""
    if n_examples < 1:
        raise InvalidArgumentError(f"n_examples must be >= 1, got {n_examples}")
    rng = np.random.default_rng(spec.seed)
    examples = []
    for idx in range(n_examples):
        src = _draw_source(spec, rng)
        summ_words = []
        for i in rule_summary(spec, src):
            syn = spec.synonyms(i)
            # draw unconditionally so the stream does not depend on noise_rate
            flip = rng.random() < spec.noise_rate
            pick = int(rng.integers(0, len(syn))) if syn else 0
            summ_words.append(syn[pick] if flip and syn else spec.word(i))
        examples.append(Example(tuple(spec.word(i) for i in src), tuple(summ_words),
                                f"{spec.rule}-{spec.seed}-{idx:06d}"))
    return examples


def rule_oracle(spec: SyntheticTaskSpec, example: Example) -> list[str]:
    """Summary a perfect rule-follower would write (ignores noise)."""
    index = {spec.word(i): i for i in range(spec.vocab_size)}
    return [spec.word(i) for i in rule_summary(spec, [index[w] for w in example.source])]


# -- JSONL --------------------------------------------------------------------

def write_jsonl(examples: Iterable[Example], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps({"id": ex.id, "source": " ".join(ex.source),
                                 "summary": " ".join(ex.summary)}, ensure_ascii=False))
            fh.write("\n")
    return path


def load_jsonl(path, strict: bool = False, max_source_tokens: int = MAX_SOURCE_TOKENS,
               max_target_tokens: int = MAX_TARGET_TOKENS) -> list[Example]:
    """Read ``{"source": str, "summary": str}`` objects, one per line.

    Bad lines raise :class:`ParseError` in strict mode and are logged and
    skipped otherwise. Token sequences are truncated to the given caps.
    """
    path = Path(path)
    examples = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                for key in ("source", "summary"):
                    if key not in obj:
                        raise ValueError(f"missing field {key!r}")
                    if not isinstance(obj[key], str):
                        raise ValueError(f"field {key!r} is not a string")
                source = tokenize(obj["source"])[:max_source_tokens]
                summary = tokenize(obj["summary"])[:max_target_tokens]
                if not source or not summary:
                    raise ValueError("source or summary is empty after tokenization")
                ex_id = str(obj.get("id", f"{path.stem}-{lineno}"))
            except ValueError as exc:
                if strict:
                    raise ParseError(str(exc), path=path, line=lineno) from exc
                log.warning("%s:%d: skipped (%s)", path, lineno, exc)
                continue
            examples.append(Example(tuple(source), tuple(summary), ex_id))
    if not examples:
        log.warning("%s: corpus is empty", path)
    return examples


# -- vocabulary ---------------------------------------------------------------

@dataclass
class Vocabulary:
    itos: list
    stoi: dict = field(init=False, repr=False)

    def __post_init__(self):
        if list(self.itos[:len(RESERVED)]) != list(RESERVED):
            raise InvalidArgumentError(f"vocabulary must start with the reserved tokens {RESERVED}")
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise InvalidArgumentError("vocabulary has duplicate tokens")

    def __len__(self):
        return len(self.itos)

    def encode(self, words: Sequence[str]) -> TokenSeq:
        return TokenSeq(tuple(self.stoi.get(w, UNK) for w in words), len(self.itos))

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[int(i)] for i in ids]


def build_vocab(corpus, max_size: int = 50) -> Vocabulary:
    """Most frequent tokens first, ties in lexicographic order; ids 0-3 reserved."""
    if max_size < len(RESERVED) + 1:
        raise InvalidArgumentError(f"max_size must be >= {len(RESERVED) + 1}, got {max_size}")
    counts = Counter()
    n = 0
    for item in corpus:
        n += 1
        if isinstance(item, Example):
            counts.update(item.source)
            counts.update(item.summary)
        else:
            counts.update(item)
    if n == 0:
        raise InvalidArgumentError("cannot build a vocabulary from an empty corpus")
    for tok in RESERVED:
        counts.pop(tok, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(RESERVED) + [w for w, _ in ranked[:max_size - len(RESERVED)]])


@dataclass(frozen=True)
class EncodedExample:
    source: TokenSeq
    summary: TokenSeq
    id: str
    raw: Example


def encode_corpus(corpus: Sequence[Example], vocab: Vocabulary) -> list[EncodedExample]:
    return [EncodedExample(vocab.encode(ex.source), vocab.encode(ex.summary), ex.id, ex) for ex in corpus]


# -- splitting ----------------------------------------------------------------

def split(corpus: Sequence, fractions=(0.8, 0.1, 0.1), seed: int = 0, few_shot: bool = False):
    """Shuffled train/dev/test partition; few-shot keeps exactly 1000 train examples."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(corpus)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_dev = min(n - n_train, int(round(fractions[1] * n)))
    parts = (order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:])
    train, dev, test = ([corpus[i] for i in idx] for idx in parts)
    if few_shot:
        if len(train) < FEW_SHOT_TRAIN:
            raise InvalidArgumentError(f"few-shot mode needs {FEW_SHOT_TRAIN} training examples, only {len(train)} available")
        train = train[:FEW_SHOT_TRAIN]
    return train, dev, test
