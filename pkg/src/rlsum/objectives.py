"""Training losses over the model's teacher-forced distributions.

Rewards enter every objective as constants; gradients flow only through
log-probabilities. The REINFORCE-with-baseline log-probability term is a
plain sum over tokens, while the candidate probabilities used by expected
risk are length-normalised (geometric mean of token probabilities).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor, stack
from .errors import InvalidArgumentError, NumericalError, StateError
from .sampling import PROB_FLOOR, Candidate

LOSS_KINDS = ("nll", "rwb", "rwb_hinge", "reinforce", "risk", "mixed")
PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LossValue:
    scalar: Tensor
    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidArgumentError(f"unknown loss kind {self.kind!r}")
        if not np.all(np.isfinite(self.scalar.values)):
            raise NumericalError(f"{self.kind} loss is not finite: {self.scalar.values}")

    @property
    def value(self) -> float:
        return self.scalar.item()


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def sequence_logprobs(dist: Tensor, tokens: Sequence[int]) -> Tensor:
    """Differentiable ``log p(token_j)`` per slot, floored at ``log(1e-12)``."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if dist.shape[0] != len(tokens):
        raise InvalidArgumentError(f"{len(tokens)} tokens for {dist.shape[0]} distribution rows")
    return dist[np.arange(len(tokens)), tokens].clamp_min(PROB_FLOOR).log()


def nll_loss(dist: Tensor, reference: Sequence[int]) -> LossValue:
    """Mean negative log-likelihood of the reference tokens."""
    dist = _as_tensor(dist)
    if dist.shape[0] != len(reference):
        raise InvalidArgumentError(
            f"reference has {len(reference)} tokens but there are {dist.shape[0]} distribution rows"
        )
    return LossValue(-sequence_logprobs(dist, reference).mean(), "nll")


def rwb_alpha(r_sample: float, r_argmax: float, hinge: bool = True) -> float:
    """Advantage coefficient; the argmax reward is the baseline.

    With ``hinge`` only samples that beat the baseline get a (negative)
    coefficient; everything else gets exactly 0.
    """
    diff = float(r_sample) - float(r_argmax)
    if hinge:
        return -max(0.0, diff)
    return -diff


def rwb_loss(alpha: float, sample_logprobs, kind: str = "rwb_hinge") -> LossValue:
    """``alpha * sum_t log p(y^s_t)``, unnormalised by length."""
    logp = _as_tensor(sample_logprobs)
    if logp.size == 0:
        raise InvalidArgumentError("sample log-probabilities are empty")
    return LossValue(logp.sum() * float(alpha), kind)


@dataclass(frozen=True)
class CandidateSet:
    """Candidate pool for expected risk with optional model-normalised probabilities.

    ``logprobs`` holds the per-token log-probabilities for each candidate as
    graph tensors; when omitted, the candidates' stored values are used as
    constants.
    """

    candidates: tuple
    rewards: tuple
    logprobs: Optional[tuple] = None
    normalized_probs: Optional[Tensor] = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        if not self.candidates:
            raise InvalidArgumentError("candidate set is empty")
        if len(self.rewards) != len(self.candidates):
            raise InvalidArgumentError("rewards and candidates differ in length")
        if self.logprobs is None:
            object.__setattr__(self, "logprobs", tuple(Tensor(c.token_logprobs) for c in self.candidates))
        else:
            object.__setattr__(self, "logprobs", tuple(_as_tensor(lp) for lp in self.logprobs))
            if len(self.logprobs) != len(self.candidates):
                raise InvalidArgumentError("logprobs and candidates differ in length")
        if self.normalized_probs is not None and self.normalized_probs.size != len(self.candidates):
            raise InvalidArgumentError("normalized_probs and candidates differ in length")

    @classmethod
    def from_candidates(cls, candidates: Sequence[Candidate], dist: Tensor | None = None) -> "CandidateSet":
        """Build a set from scored candidates, reading log-probs from ``dist`` if given."""
        rewards = []
        for c in candidates:
            if c.reward is None:
                raise StateError(f"{c.method} candidate has no reward")
            rewards.append(c.reward)
        logprobs = None
        if dist is not None:
            logprobs = tuple(sequence_logprobs(dist, c.tokens) for c in candidates)
        return cls(tuple(candidates), tuple(rewards), logprobs)

    def __len__(self):
        return len(self.candidates)


def risk_candidate_probs(cset: CandidateSet) -> CandidateSet:
    """Normalise ``exp(mean token log-prob)`` over the candidate set."""
    scores = []
    for lp in cset.logprobs:
        m = lp.size
        if m < 1:
            raise InvalidArgumentError("candidate with no tokens")
        scores.append((lp.sum() * (1.0 / m)).exp())
    f = stack(scores)
    probs = f / f.sum()
    return replace(cset, normalized_probs=probs)


def risk_loss(cset: CandidateSet) -> LossValue:
    """``-sum_k r_k * p_k`` over the candidate set."""
    if cset.normalized_probs is None:
        raise StateError("candidate probabilities are not populated; call risk_candidate_probs first")
    total = float(cset.normalized_probs.values.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise NumericalError(f"candidate probabilities sum to {total}")
    rewards = Tensor(np.asarray(cset.rewards))
    return LossValue(-(cset.normalized_probs * rewards).sum(), "risk")


def mixed_loss(l_xent: LossValue, l_rl: LossValue, gamma: float) -> LossValue:
    """``gamma * l_xent + (1 - gamma) * l_rl``."""
    if not (0.0 <= gamma <= 1.0) or math.isnan(gamma):
        raise InvalidArgumentError(f"gamma must lie in [0, 1], got {gamma}")
    return LossValue(l_xent.scalar * gamma + l_rl.scalar * (1.0 - gamma), "mixed")
