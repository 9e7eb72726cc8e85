"""Two-phase training: NLL warm start, then RL fine-tuning on a mixed loss.

Fine-tuning draws candidates from the teacher-forced distributions, scores
them with ROUGE-L F1 against the reference and combines the RL objective
with NLL as ``gamma * nll + (1 - gamma) * rl``. Validation runs every
``validate_every`` iterations and training stops once the dev loss has not
improved for ``patience`` iterations (full-data mode) or after the fixed
few-shot budget.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import backward
from .data import FEW_SHOT_TRAIN, EncodedExample
from .errors import ConfigError, InvalidArgumentError, NumericalError, StateError
from .model import DEFAULT_CLIP, Adam, Seq2SeqModel, forward_teacher_forced, predict_dist, save_checkpoint, sgd_step
from .objectives import (
    CandidateSet,
    mixed_loss,
    nll_loss,
    risk_candidate_probs,
    risk_loss,
    rwb_alpha,
    rwb_loss,
    sequence_logprobs,
)
from .sampling import DEFAULT_TAU, PROB_FLOOR, argmax_decode, generate_candidates
from .text_metrics import rouge_scores

log = logging.getLogger(__name__)

OBJECTIVES = ("nll", "rwb_hinge", "risk2", "risk3", "reinforce")
SAMPLERS = {
    "rwb_hinge": ("argmax", "gumbel"),
    "risk2": ("argmax", "gumbel"),
    "risk3": ("argmax", "second_best", "gumbel"),
    # single-sample policy gradient, used only as the gamma-sweep proxy
    "reinforce": ("gumbel",),
}
OPTIMIZERS = ("adam", "sgd")
GAMMA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_GAMMA = 0.9
FEW_SHOT_ITERATIONS = 2000
SEEDS = (13, 42, 1337)


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "nll"
    gamma: float = DEFAULT_GAMMA
    learning_rate: float = 3e-3
    optimizer: str = "adam"
    clip_norm: float = DEFAULT_CLIP
    max_iterations: int = 4000
    validate_every: int = 200
    patience: int = 600
    few_shot: bool = False
    seed: int = 13
    temperature: float = DEFAULT_TAU
    samplers: Optional[tuple] = None
    allow_cold_start: bool = False

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective: must be one of {OBJECTIVES}, got {self.objective!r}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma: must lie in [0, 1], got {self.gamma}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate: must be >= 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer: must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm: must be positive, got {self.clip_norm}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations: must be >= 0, got {self.max_iterations}")
        if self.validate_every <= 0:
            raise ConfigError(f"validate_every: must be positive, got {self.validate_every}")
        if self.patience <= 0 or self.patience % self.validate_every:
            raise ConfigError(f"patience: must be a positive multiple of validate_every ({self.validate_every}), got {self.patience}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature: must be positive, got {self.temperature}")
        if self.objective != "nll":
            expected = SAMPLERS[self.objective]
            if self.samplers is None:
                object.__setattr__(self, "samplers", expected)
            elif tuple(self.samplers) != expected:
                raise ConfigError(f"samplers: objective {self.objective} uses {expected}, got {tuple(self.samplers)}")
        elif self.samplers:
            raise ConfigError("samplers: the nll objective takes no samplers")

    @property
    def patience_validations(self) -> int:
        return self.patience // self.validate_every

    @property
    def iteration_budget(self) -> int:
        return FEW_SHOT_ITERATIONS if self.few_shot else self.max_iterations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samplers"] = list(self.samplers) if self.samplers else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown training option")
        d = dict(d)
        if d.get("samplers") is not None:
            d["samplers"] = tuple(d["samplers"])
        return cls(**d)


@dataclass
class RunResult:
    objective: str
    loss_trace: list = field(default_factory=list)
    validations: list = field(default_factory=list)
    best_iteration: Optional[int] = None
    best_state: Optional[dict] = field(default=None, repr=False)
    stop_reason: str = ""
    iterations: int = 0

    @property
    def best_dev_loss(self) -> Optional[float]:
        if not self.validations:
            return None
        return min(v["loss"] for v in self.validations)

    def summary(self) -> dict:
        last = self.validations[-1] if self.validations else {}
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "best_iteration": self.best_iteration,
            "best_dev_loss": self.best_dev_loss,
            "final_dev": last,
        }


# -- evaluation ---------------------------------------------------------------

def validate(model, dev: Sequence[EncodedExample], dist_fn: Callable = predict_dist) -> dict:
    """Mean dev NLL and corpus-mean ROUGE-1/2/L F1 of argmax decodes.

    ``dist_fn(model, source, target)`` must return the probability rows; it
    defaults to the graph-free forward pass of :class:`Seq2SeqModel`.
    """
    if not dev:
        raise InvalidArgumentError("validation corpus is empty")
    losses, scores = [], []
    for ex in dev:
        dist = np.asarray(dist_fn(model, ex.source, ex.summary))
        ref = np.asarray(ex.summary.tokens)
        losses.append(float(-np.mean(np.log(np.maximum(dist[np.arange(len(ref)), ref], PROB_FLOOR)))))
        scores.append(rouge_scores(ex.summary.tokens, argmax_decode(dist).tokens))
    out = {"loss": float(np.mean(losses))}
    for key in ("rouge1", "rouge2", "rougeL"):
        out[key] = float(np.mean([s[key] for s in scores]))
    return out


def decode_corpus(model, corpus: Sequence[EncodedExample], dist_fn: Callable = predict_dist) -> list[tuple]:
    """Argmax decodes under teacher forcing, one token tuple per example."""
    return [argmax_decode(dist_fn(model, ex.source, ex.summary)).tokens for ex in corpus]


def early_stop(trace: Sequence[float], patience: int) -> bool:
    """True when none of the last ``patience`` validation losses beat the earlier minimum."""
    if patience < 1:
        raise InvalidArgumentError(f"patience must be >= 1, got {patience}")
    if len(trace) <= patience:
        return False
    best_before = min(trace[:-patience])
    return min(trace[-patience:]) >= best_before


# -- one training step --------------------------------------------------------

def rl_loss(model: Seq2SeqModel, ex: EncodedExample, config: TrainConfig, rng: np.random.Generator):
    """Build the mixed loss for one example. Returns ``(loss, info)``."""
    dist = forward_teacher_forced(model, ex.source, ex.summary)
    l_xent = nll_loss(dist, ex.summary.tokens)
    cands = generate_candidates(dist.values, config.samplers, ex.summary.tokens, rng=rng,
                                temperature=config.temperature)
    by_method = {c.method: c for c in cands}
    if config.objective == "rwb_hinge":
        alpha = rwb_alpha(by_method["gumbel"].reward, by_method["argmax"].reward, hinge=True)
        l_rl = rwb_loss(alpha, sequence_logprobs(dist, by_method["gumbel"].tokens), "rwb_hinge")
    elif config.objective == "reinforce":
        alpha = -by_method["gumbel"].reward
        l_rl = rwb_loss(alpha, sequence_logprobs(dist, by_method["gumbel"].tokens), "reinforce")
    else:
        cset = risk_candidate_probs(CandidateSet.from_candidates(cands, dist))
        l_rl = risk_loss(cset)
    info = {"rewards": {c.method: c.reward for c in cands}, "rl": l_rl.value, "nll": l_xent.value}
    return mixed_loss(l_xent, l_rl, config.gamma), info


def _check_finite(model: Seq2SeqModel, iteration: int):
    for name, p in model.params.items():
        if not np.all(np.isfinite(p.values)):
            raise NumericalError(f"parameter {name} became non-finite at iteration {iteration}")


def _train(model: Seq2SeqModel, train, dev, config: TrainConfig, loss_fn, on_step=None) -> RunResult:
    if not train:
        raise InvalidArgumentError("training corpus is empty")
    if config.few_shot:
        train = list(train)[:FEW_SHOT_TRAIN]
    order_rng = np.random.default_rng([config.seed, 0])
    sample_rng = np.random.default_rng([config.seed, 1])
    result = RunResult(config.objective)
    budget = config.iteration_budget
    if config.optimizer == "adam":
        step = Adam(model, config.learning_rate, clip_norm=config.clip_norm).step
    else:
        def step():
            return sgd_step(model, config.learning_rate, config.clip_norm)

    def run_validation(it):
        metrics = validate(model, dev)
        metrics["iteration"] = it
        # earliest checkpoint wins ties
        if result.best_iteration is None or metrics["loss"] < result.best_dev_loss:
            result.best_iteration = it
            result.best_state = model.state_dict()
        result.validations.append(metrics)

    if dev:
        run_validation(0)
    order = order_rng.permutation(len(train))
    pos = 0
    it = 0
    result.stop_reason = "few_shot_budget" if config.few_shot else "max_iterations"
    while it < budget:
        if pos == len(order):
            order, pos = order_rng.permutation(len(train)), 0
        ex = train[order[pos]]
        pos += 1
        loss, info = loss_fn(ex, sample_rng)
        result.loss_trace.append(loss.value)
        backward(loss)
        step()
        it += 1
        _check_finite(model, it)
        if on_step is not None:
            on_step(it, loss, info)
        if dev and it % config.validate_every == 0:
            run_validation(it)
            if not config.few_shot and early_stop([v["loss"] for v in result.validations],
                                                  config.patience_validations):
                result.stop_reason = "early_stop"
                break
    result.iterations = it
    return result


def train_nll(model: Seq2SeqModel, train: Sequence[EncodedExample], config: TrainConfig,
              dev: Sequence[EncodedExample] = (), on_step=None) -> RunResult:
    """Warm-start phase: minimise token-level NLL with batch size 1."""
    if config.objective != "nll":
        raise ConfigError(f"objective: train_nll needs 'nll', got {config.objective!r}")

    def loss_fn(ex, rng):
        dist = forward_teacher_forced(model, ex.source, ex.summary)
        return nll_loss(dist, ex.summary.tokens), {}

    result = _train(model, train, dev, config, loss_fn, on_step)
    model.warm_started = True
    return result


def finetune_rl(model: Seq2SeqModel, train: Sequence[EncodedExample], config: TrainConfig,
                dev: Sequence[EncodedExample] = (), on_step=None) -> RunResult:
    """RL phase on top of an NLL-trained model; see :func:`rl_loss`."""
    if config.objective == "nll":
        raise ConfigError("objective: finetune_rl needs an RL objective, got 'nll'")
    if not (model.warm_started or config.allow_cold_start):
        raise StateError("finetune_rl expects an NLL warm-started model; set allow_cold_start to override")
    return _train(model, train, dev, config, lambda ex, rng: rl_loss(model, ex, config, rng), on_step)


# -- gamma selection ----------------------------------------------------------

def gamma_sweep(model_factory: Callable[[], Seq2SeqModel], train, dev, grid=GAMMA_GRID,
                config: TrainConfig | None = None) -> list[dict]:
    """Dev ROUGE after single-sample REINFORCE fine-tuning at each ``gamma``.

    ``model_factory`` must return a fresh copy of the same warm-started model
    on every call. One seed per grid point.
    """
    grid = list(grid)
    if not grid:
        raise InvalidArgumentError("gamma grid is empty")
    for g in grid:
        if not (0.0 <= g <= 1.0):
            raise InvalidArgumentError(f"gamma values must lie in [0, 1], got {g}")
    if not dev:
        raise InvalidArgumentError("gamma sweep needs a dev corpus")
    base = config or TrainConfig()
    rows = []
    for g in grid:
        cfg = replace(base, objective="reinforce", gamma=float(g), samplers=None)
        model = model_factory()
        result = finetune_rl(model, train, cfg, dev=())
        metrics = validate(model, dev)
        rows.append({"gamma": float(g), "rouge1": metrics["rouge1"], "rouge2": metrics["rouge2"],
                     "rougeL": metrics["rougeL"], "dev_loss": metrics["loss"],
                     "iterations": result.iterations})
    return rows


def select_gamma(rows: Sequence[dict]) -> float:
    """Gamma with the highest dev ROUGE-L; ties go to the lowest gamma."""
    if not rows:
        raise InvalidArgumentError("no sweep rows to select from")
    best = None
    for row in sorted(rows, key=lambda r: r["gamma"]):
        if best is None or row["rougeL"] > best["rougeL"]:
            best = row
    return best["gamma"]


# -- run directories ----------------------------------------------------------

TRACE_COLUMNS = ("iteration", "loss", "dev_loss", "dev_rouge1", "dev_rouge2", "dev_rougeL")


def write_trace_csv(result: RunResult, path) -> Path:
    path = Path(path)
    by_iter = {v["iteration"]: v for v in result.validations}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        iterations = sorted(set(range(1, len(result.loss_trace) + 1)) | set(by_iter))
        for it in iterations:
            loss = f"{result.loss_trace[it - 1]:.10g}" if 1 <= it <= len(result.loss_trace) else ""
            v = by_iter.get(it)
            dev = [f"{v[k]:.6f}" for k in ("loss", "rouge1", "rouge2", "rougeL")] if v else ["", "", "", ""]
            w.writerow([it, loss, *dev])
    return path


def write_run_dir(out_dir, result: RunResult, model: Seq2SeqModel, config: dict, vocab=None,
                  extra: dict | None = None) -> Path:
    """Checkpoints, ``trace.csv`` and ``result.json`` for one run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    save_checkpoint(model, out / "checkpoint.json", vocab=vocab, config=config)
    if result.best_state is not None:
        best = model.clone()
        best.load_state_dict(result.best_state)
        save_checkpoint(best, out / "best_checkpoint.json", vocab=vocab, config=config)
    write_trace_csv(result, out / "trace.csv")
    summary = result.summary()
    if extra:
        summary.update(extra)
    (out / "result.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out
