"""Choosing the NLL weight gamma with a short REINFORCE sweep on the dev split.

Run: python demos/05_gamma_sweep.py
"""
from rlsum.data import SyntheticTaskSpec, build_vocab, encode_corpus, generate_synthetic, split
from rlsum.model import init_model
from rlsum.training import GAMMA_GRID, TrainConfig, gamma_sweep, select_gamma, train_nll

spec = SyntheticTaskSpec(rule="lead_k", vocab_size=16, source_len=(4, 8), k=3, noise_rate=0.1, seed=1)
corpus = generate_synthetic(spec, 400)
vocab = build_vocab(corpus)
train, dev, _ = (encode_corpus(part, vocab) for part in split(corpus, seed=1))

warm = init_model(len(vocab), hidden=16, seed=0)
train_nll(warm, train, TrainConfig(learning_rate=1e-2, max_iterations=600))

# Each grid point fine-tunes a fresh copy of the same warm start.
rows = gamma_sweep(warm.clone, train, dev, GAMMA_GRID, TrainConfig(learning_rate=1e-3, max_iterations=200))
print(f"{'gamma':>5} {'R-1':>7} {'R-2':>7} {'R-L':>7} {'dev NLL':>8}")
for r in rows:
    print(f"{r['gamma']:5.1f} {r['rouge1']:7.4f} {r['rouge2']:7.4f} {r['rougeL']:7.4f} {r['dev_loss']:8.4f}")
print("selected gamma:", select_gamma(rows))
