"""ROUGE rewards and n-gram novelty on a handful of sentences.

Run: python demos/01_rouge_and_novelty.py
"""
from rlsum.text_metrics import lcs_length, ngram_novelty, rouge_l_f1, rouge_n_f1, tokenize

reference = tokenize("The cat sat on the mat.")
candidates = {
    "exact copy": "The cat sat on the mat.",
    "shorter": "The cat sat.",
    "reordered": "On the mat the cat sat.",
    "paraphrase": "A feline rested on the rug.",
}

print("reference:", reference)
print(f"{'candidate':<12} {'R-1':>6} {'R-2':>6} {'R-L':>6}  LCS")
for name, text in candidates.items():
    hyp = tokenize(text)
    print(f"{name:<12} {rouge_n_f1(reference, hyp, 1).f1:6.3f} {rouge_n_f1(reference, hyp, 2).f1:6.3f} "
          f"{rouge_l_f1(reference, hyp).f1:6.3f}  {lcs_length(reference, hyp)}")

# ROUGE-L only rewards in-order overlap, so reordering costs more under L than under R-1.
# Novelty asks the opposite question: how much of a summary is *not* lifted from the source.
source = tokenize("Officials said on Monday that the cat, which had been missing for a week, sat on the mat.")
print("\nnovelty of each candidate with respect to the source (unique n-grams absent from it)")
for name, text in candidates.items():
    hyp = tokenize(text)
    print(f"{name:<12} " + "  ".join(f"{n}-gram {ngram_novelty(source, hyp, n):.2f}" for n in (1, 2, 3)))
