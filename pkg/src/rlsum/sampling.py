"""Candidate summaries from teacher-forced decoder distributions.

Every sampler reads one probability row per target slot, so all candidates
for an example have the same length as the reference. Three samplers:

* :func:`argmax_decode`: most probable token per slot
* :func:`second_best_decode`: second most probable token per slot
* :func:`gumbel_softmax_sample`: a relaxed sample with temperature ``tau``;
  the hard token per slot is the argmax of the relaxed vector

Token log-probabilities always come from the original distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .autodiff import Tensor
from .errors import InvalidArgumentError, NumericalError
from .text_metrics import rouge_l_f1

PROB_FLOOR = 1e-12
ROW_SUM_TOL = 1e-9
DEFAULT_TAU = 0.1
METHODS = ("argmax", "second_best", "gumbel")


@dataclass(frozen=True)
class GumbelConfig:
    temperature: float = DEFAULT_TAU
    rng_seed: int = 0

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidArgumentError(f"temperature must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class Candidate:
    tokens: tuple
    method: str
    token_logprobs: np.ndarray
    reward: Optional[float] = None
    soft_rows: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown sampling method {self.method!r}")
        if len(self.token_logprobs) != len(self.tokens):
            raise InvalidArgumentError("token_logprobs and tokens differ in length")

    def scored(self, reference) -> "Candidate":
        """Copy with ``reward`` = ROUGE-L F1 against ``reference``."""
        return replace(self, reward=rouge_l_f1(reference, self.tokens).f1)


def as_prob_matrix(dist) -> np.ndarray:
    """Validate an (m x V) array of probability rows and return it as float64."""
    arr = dist.values if isinstance(dist, Tensor) else np.asarray(dist, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidArgumentError(f"expected a non-empty (slots x vocab) matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError("probabilities contain NaN or infinity")
    if np.any(arr < 0):
        raise InvalidArgumentError("probabilities must be non-negative")
    if np.max(np.abs(arr.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise InvalidArgumentError("every probability row must sum to 1")
    return arr


def _logprobs_at(arr, tokens):
    return np.log(np.maximum(arr[np.arange(len(tokens)), tokens], PROB_FLOOR))


def argmax_decode(dist) -> Candidate:
    arr = as_prob_matrix(dist)
    tokens = np.argmax(arr, axis=1)  # first maximum wins ties
    return Candidate(tuple(int(t) for t in tokens), "argmax", _logprobs_at(arr, tokens))


def second_best_decode(dist) -> Candidate:
    arr = as_prob_matrix(dist)
    if arr.shape[1] < 2:
        raise InvalidArgumentError("second-best decoding needs a vocabulary of at least 2")
    rows = np.arange(arr.shape[0])
    masked = arr.copy()
    masked[rows, np.argmax(arr, axis=1)] = -np.inf
    tokens = np.argmax(masked, axis=1)
    return Candidate(tuple(int(t) for t in tokens), "second_best", _logprobs_at(arr, tokens))


def gumbel_noise(rng: np.random.Generator, size=None):
    """Standard Gumbel draws ``-log(-log(u))`` with ``u`` kept inside (0, 1)."""
    u = np.clip(rng.random(size), PROB_FLOOR, 1.0 - PROB_FLOOR)
    g = -np.log(-np.log(u))
    return float(g) if size is None else g


def gumbel_transform(u):
    """Deterministic part of :func:`gumbel_noise`, exposed for checking."""
    u = np.clip(np.asarray(u, dtype=np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return -np.log(-np.log(u))


def relaxed_rows(arr: np.ndarray, noise: np.ndarray, temperature: float) -> np.ndarray:
    z = (np.log(np.maximum(arr, PROB_FLOOR)) + noise) / temperature
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gumbel_softmax_sample(dist, cfg: GumbelConfig = GumbelConfig(), rng: np.random.Generator | None = None) -> Candidate:
    """One relaxed sample per slot; fresh noise for every vocabulary entry.

    When ``rng`` is omitted a generator seeded from ``cfg.rng_seed`` is used,
    so the call is reproducible. Training passes its own stream instead.
    """
    if not cfg.temperature > 0:
        raise InvalidArgumentError(f"temperature must be > 0, got {cfg.temperature}")
    arr = as_prob_matrix(dist)
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    soft = relaxed_rows(arr, gumbel_noise(rng, arr.shape), cfg.temperature)
    tokens = np.argmax(soft, axis=1)
    return Candidate(tuple(int(t) for t in tokens), "gumbel", _logprobs_at(arr, tokens), soft_rows=soft)


def generate_candidates(dist, methods, reference, rng=None, temperature: float = DEFAULT_TAU) -> list[Candidate]:
    """Run each sampler in ``methods`` and score the results against ``reference``."""
    out = []
    for method in methods:
        if method == "argmax":
            cand = argmax_decode(dist)
        elif method == "second_best":
            cand = second_best_decode(dist)
        elif method == "gumbel":
            cand = gumbel_softmax_sample(dist, GumbelConfig(temperature), rng=rng)
        else:
            raise InvalidArgumentError(f"unknown sampling method {method!r}")
        out.append(cand.scored(reference))
    return out
