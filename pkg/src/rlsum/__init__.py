"""Reinforcement-learning objectives for sequence-to-sequence summarisation."""
from .analysis import bootstrap_test, emit_report, length_bucket_rouge, novelty_profile, PairedScores
from .data import (
    Example,
    SyntheticTaskSpec,
    Vocabulary,
    build_vocab,
    encode_corpus,
    generate_synthetic,
    load_jsonl,
    split,
    write_jsonl,
)
from .errors import ConfigError, InvalidArgumentError, NumericalError, ParseError, StateError
from .model import Adam, Seq2SeqModel, forward_teacher_forced, init_model, load_checkpoint, save_checkpoint
from .objectives import CandidateSet, mixed_loss, nll_loss, risk_candidate_probs, risk_loss, rwb_alpha, rwb_loss
from .sampling import GumbelConfig, argmax_decode, gumbel_softmax_sample, second_best_decode
from .text_metrics import TokenSeq, ngram_novelty, rouge_l_f1, rouge_n_f1, rouge_scores, tokenize
from .training import TrainConfig, early_stop, finetune_rl, gamma_sweep, train_nll, validate

__version__ = "0.1.0"
