"""End-to-end protocol: NLL warm start, RL fine-tuning per objective, evaluation.

For every seed a model is warm-started with NLL until dev loss stops
improving; that checkpoint is the NLL baseline. Each RL objective then
fine-tunes a copy of it. A matched-budget NLL continuation (``nll_cont``)
is trained alongside as a control, so the effect of extra training can be
told apart from the effect of the RL objective.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis
from .data import SyntheticTaskSpec, build_vocab, encode_corpus, generate_synthetic, split
from .model import init_model
from .training import SEEDS, TrainConfig, decode_corpus, finetune_rl, train_nll, write_run_dir
from .text_metrics import rouge_scores

log = logging.getLogger(__name__)

BASELINE = "nll"
CONTROL = "nll_cont"


def default_task() -> SyntheticTaskSpec:
    """Noisy keyword extraction; 46 content words, so V = 50 with reserved ids."""
    return SyntheticTaskSpec(rule="keyword_extract", vocab_size=36, n_keywords=10, source_len=(8, 20),
                             keyword_rate=0.3, noise_rate=0.3, n_synonyms=1, seed=0)


@dataclass
class ExperimentConfig:
    task: SyntheticTaskSpec = field(default_factory=default_task)
    n_examples: int = 2500
    fractions: tuple = (0.8, 0.1, 0.1)
    split_seed: int = 0
    vocab_size: int = 50
    hidden: int = 32
    warm: TrainConfig = field(default_factory=lambda: TrainConfig(objective="nll", learning_rate=3e-3,
                                                                   max_iterations=6000))
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(objective="risk2", gamma=0.9,
                                                                       learning_rate=1e-3, max_iterations=2000))
    objectives: tuple = ("rwb_hinge", "risk2", "risk3")
    seeds: tuple = SEEDS
    control: bool = True
    bootstrap_resamples: int = analysis.DEFAULT_RESAMPLES

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "n_examples": self.n_examples,
            "fractions": list(self.fractions),
            "split_seed": self.split_seed,
            "vocab_size": self.vocab_size,
            "hidden": self.hidden,
            "warm": self.warm.to_dict(),
            "finetune": self.finetune.to_dict(),
            "objectives": list(self.objectives),
            "seeds": list(self.seeds),
            "control": self.control,
            "bootstrap_resamples": self.bootstrap_resamples,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    test_sources: list
    test_references: list
    # system -> seed -> list of decoded token tuples
    decodes: dict = field(default_factory=dict)
    # system -> seed -> {"rouge1": [...], "rouge2": [...], "rougeL": [...]}
    per_example: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)

    @property
    def systems(self) -> list[str]:
        return list(self.per_example)

    def seed_mean_scores(self, system: str, metric: str = "rougeL") -> np.ndarray:
        """Per-example scores averaged over seeds."""
        return np.mean([self.per_example[system][s][metric] for s in self.config.seeds], axis=0)

    def mean_metric(self, system: str, metric: str = "rougeL") -> float:
        return float(np.mean([np.mean(self.per_example[system][s][metric]) for s in self.config.seeds]))

    def metrics_table(self) -> dict:
        return {
            name: {m: self.mean_metric(name, m) for m in ("rouge1", "rouge2", "rougeL")}
            for name in self.systems
        }

    def significance(self, seed: int = 0) -> dict:
        base = self.seed_mean_scores(BASELINE)
        out = {}
        for name in self.systems:
            if name == BASELINE:
                continue
            res = analysis.bootstrap_test(analysis.PairedScores(self.seed_mean_scores(name), base),
                                          resamples=self.config.bootstrap_resamples, seed=seed)
            out[name] = {"p_value": res.p_value, "significant": res.significant,
                         "delta_rougeL": res.mean_a - res.mean_b}
        return out

    def novelty(self) -> analysis.NoveltyReport:
        """Novelty averaged over seeds."""
        per_seed = [
            analysis.novelty_profile(self.test_sources, {n: self.decodes[n][s] for n in self.systems})
            for s in self.config.seeds
        ]
        values = {
            name: {n: float(np.mean([r.values[name][n] for r in per_seed])) for n in analysis.NOVELTY_N}
            for name in self.systems
        }
        return analysis.NoveltyReport(values)

    def length_buckets(self, edges=analysis.DEFAULT_BUCKET_EDGES) -> dict:
        out = {}
        for name in self.systems:
            rows = [analysis.length_bucket_rouge(self.test_references, self.decodes[name][s], edges)
                    for s in self.config.seeds]
            merged = {}
            for i, row in enumerate(rows[0]):
                means = [r[i]["mean_rougeL"] for r in rows if r[i]["mean_rougeL"] is not None]
                merged[row["bucket"]] = {"count": row["count"], "mean_rougeL": float(np.mean(means)) if means else None}
            out[name] = merged
        return out


def _evaluate(model, test) -> tuple[list, dict]:
    decodes = decode_corpus(model, test)
    scores = {"rouge1": [], "rouge2": [], "rougeL": []}
    for ex, hyp in zip(test, decodes):
        s = rouge_scores(ex.summary.tokens, hyp)
        for k in scores:
            scores[k].append(s[k])
    return decodes, scores


def prepare_data(cfg: ExperimentConfig):
    corpus = generate_synthetic(cfg.task, cfg.n_examples)
    vocab = build_vocab(corpus, cfg.vocab_size)
    train, dev, test = split(corpus, cfg.fractions, seed=cfg.split_seed)
    return vocab, encode_corpus(train, vocab), encode_corpus(dev, vocab), encode_corpus(test, vocab)


def run_experiment(cfg: ExperimentConfig | None = None, out_dir=None, warm_models: dict | None = None) -> ExperimentResult:
    """Run the whole protocol; optionally write run directories under ``out_dir``.

    ``warm_models`` may map seed -> an already warm-started model to skip
    that phase.
    """
    cfg = cfg or ExperimentConfig()
    vocab, train, dev, test = prepare_data(cfg)
    result = ExperimentResult(cfg, [ex.source.tokens for ex in test], [ex.summary.tokens for ex in test])
    systems = [BASELINE, *cfg.objectives] + ([CONTROL] if cfg.control else [])
    for name in systems:
        result.decodes[name], result.per_example[name], result.runs[name] = {}, {}, {}
        result.seconds[name] = 0.0

    def record(name, seed, model, run):
        result.decodes[name][seed], result.per_example[name][seed] = _evaluate(model, test)
        result.runs[name][seed] = run
        if out_dir is not None and run is not None:
            write_run_dir(Path(out_dir) / f"{name}-seed{seed}", run, model,
                          {"experiment": cfg.to_dict(), "system": name, "seed": seed}, vocab=vocab)

    for seed in cfg.seeds:
        t0 = time.perf_counter()
        if warm_models and seed in warm_models:
            base, warm_run = warm_models[seed].clone(), None
        else:
            base = init_model(len(vocab), cfg.hidden, seed)
            warm_run = train_nll(base, train, replace(cfg.warm, seed=seed), dev=dev)
        result.seconds[BASELINE] += time.perf_counter() - t0
        record(BASELINE, seed, base, warm_run)
        log.info("seed %d: warm start done (%s)", seed, warm_run.stop_reason if warm_run else "reused")

        for obj in cfg.objectives:
            t0 = time.perf_counter()
            model = base.clone()
            run = finetune_rl(model, train, replace(cfg.finetune, objective=obj, samplers=None, seed=seed), dev=dev)
            result.seconds[obj] += time.perf_counter() - t0
            record(obj, seed, model, run)
            log.info("seed %d: %s done after %d iterations", seed, obj, run.iterations)

        if cfg.control:
            t0 = time.perf_counter()
            model = base.clone()
            run = train_nll(model, train, replace(cfg.finetune, objective="nll", samplers=None, seed=seed), dev=dev)
            result.seconds[CONTROL] += time.perf_counter() - t0
            record(CONTROL, seed, model, run)

    if out_dir is not None:
        write_reports(result, out_dir)
    return result


def write_reports(result: ExperimentResult, out_dir) -> None:
    """Metrics, significance, novelty and length-bucket reports plus gnuplot data."""
    out = Path(out_dir)
    table = result.metrics_table()
    sig = result.significance()
    for name, row in table.items():
        row.update(sig.get(name, {}))
    analysis.emit_report(table, out / "metrics.csv", "csv")
    analysis.emit_report(table, out / "metrics.json", "json")
    nov = result.novelty()
    analysis.emit_report(nov.as_rows(), out / "novelty.csv", "csv")
    analysis.write_gnuplot([[n, *(nov.values[s][n] for s in result.systems)] for n in analysis.NOVELTY_N],
                           ["n", *result.systems], out / "novelty.dat")
    buckets = result.length_buckets()
    labels = list(next(iter(buckets.values())))
    analysis.emit_report({s: {lab: buckets[s][lab]["mean_rougeL"] for lab in labels} for s in result.systems},
                         out / "length_buckets.csv", "csv")
    analysis.write_gnuplot(
        [[i, lab, buckets[result.systems[0]][lab]["count"], *(buckets[s][lab]["mean_rougeL"] for s in result.systems)]
         for i, lab in enumerate(labels)],
        ["index", "bucket", "count", *result.systems], out / "length_buckets.dat")
    (out / "config_resolved.json").write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")
