"""The three ways a candidate summary is drawn from the model's distributions.

Run: python demos/02_samplers.py
"""
import numpy as np

from rlsum.sampling import GumbelConfig, argmax_decode, gumbel_softmax_sample, second_best_decode

# Three decoding slots over a five-token vocabulary.
dist = np.array([
    [0.50, 0.30, 0.10, 0.05, 0.05],
    [0.20, 0.20, 0.40, 0.10, 0.10],
    [0.05, 0.05, 0.10, 0.35, 0.45],
])

print("argmax      ", argmax_decode(dist).tokens)
print("second best ", second_best_decode(dist).tokens)

# Gumbel-softmax perturbs log-probabilities with Gumbel noise and sharpens with a temperature.
# The hard token is the argmax of the relaxed row, so each slot is an exact sample from p.
for tau in (1.0, 0.1, 0.01):
    c = gumbel_softmax_sample(dist, GumbelConfig(tau, rng_seed=0))
    print(f"gumbel tau={tau:<5} tokens {c.tokens}  peak soft mass per slot {np.round(c.soft_rows.max(axis=1), 3)}")

# Empirical check of the Gumbel-max property on the first row.
draws = gumbel_softmax_sample(np.tile(dist[0], (50_000, 1)), GumbelConfig(0.1, rng_seed=1))
freq = np.bincount(draws.tokens, minlength=5) / 50_000
print("\nrow 0 probabilities   ", dist[0])
print("row 0 sample frequency", np.round(freq, 3))
