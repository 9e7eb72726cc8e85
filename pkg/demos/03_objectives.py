"""Losses on a toy model: NLL, REINFORCE with an argmax baseline and hinge, expected risk.

Run: python demos/03_objectives.py
"""
import numpy as np

from rlsum.autodiff import backward
from rlsum.model import forward_teacher_forced, grad_norm, init_model
from rlsum.objectives import (
    CandidateSet,
    mixed_loss,
    nll_loss,
    risk_candidate_probs,
    risk_loss,
    rwb_alpha,
    rwb_loss,
    sequence_logprobs,
)
from rlsum.sampling import generate_candidates

model = init_model(vocab_size=12, hidden=16, seed=0)
source, reference = [4, 7, 9, 5, 11, 6], [7, 9, 6]
rng = np.random.default_rng(0)

dist = forward_teacher_forced(model, source, reference)
cands = generate_candidates(dist.values, ("argmax", "second_best", "gumbel"), reference, rng)
for c in cands:
    print(f"{c.method:<12} tokens {c.tokens}  reward {c.reward:.3f}")

xent = nll_loss(dist, reference)
print(f"\nNLL {xent.value:.4f}")

# The argmax reward is the baseline; with the hinge a sample that does not beat it contributes nothing.
by = {c.method: c for c in cands}
alpha = rwb_alpha(by["gumbel"].reward, by["argmax"].reward)
rwb = rwb_loss(alpha, sequence_logprobs(dist, by["gumbel"].tokens))
print(f"alpha {alpha:+.3f}  RwB-hinge loss {rwb.value:.4f}")

cset = risk_candidate_probs(CandidateSet.from_candidates(cands, dist))
print("candidate probabilities", np.round(cset.normalized_probs.values, 4))
risk = risk_loss(cset)
print(f"expected risk {risk.value:.4f}")

loss = mixed_loss(xent, risk, gamma=0.9)
backward(loss)
print(f"mixed loss (gamma 0.9) {loss.value:.4f}, gradient norm {grad_norm(model):.4f}")

# Equal rewards make expected risk constant in the parameters.
for p in model.parameters():
    p.grad = None
dist = forward_teacher_forced(model, source, reference)
flat = risk_candidate_probs(CandidateSet(cands, [0.5] * len(cands),
                                         [sequence_logprobs(dist, c.tokens) for c in cands]))
backward(risk_loss(flat))
print(f"gradient norm with equal rewards {grad_norm(model):.2e}")
