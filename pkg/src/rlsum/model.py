"""Tiny GRU encoder-decoder with one dot-product attention layer.

The model stands in for a large pre-trained summarizer: the training
objectives only need a differentiable map from (source, target prefix) to
per-slot distributions over the vocabulary.

Architecture, for vocabulary size V and hidden size d:

* shared embedding table ``embed`` (V x d)
* encoder GRU: ``enc_W`` (d x 3d), ``enc_U`` (d x 3d), ``enc_b`` (3d)
* decoder GRU: ``dec_W``, ``dec_U``, ``dec_b`` with the same shapes,
  initial state = final encoder state
* attention: context ``C = softmax(S H^T) H`` over encoder states ``H``,
  then ``O = tanh([S, C] comb_W + comb_b)`` with ``comb_W`` (2d x d)
* output projection ``out_W`` (d x V), ``out_b`` (V), softmax

so the parameter count is ``2*V*d + V + 14*d**2 + 7*d``
(see :func:`parameter_count`).
"""
from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, no_grad, stack
from .errors import InvalidArgumentError, ParseError, StateError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")
INIT_SCALE = 0.08
DEFAULT_LR = 5e-4
DEFAULT_CLIP = 1.0

CHECKPOINT_FORMAT = "rlsum-checkpoint"
CHECKPOINT_VERSION = 1


def parameter_shapes(vocab_size: int, hidden: int) -> dict[str, tuple[int, ...]]:
    V, d = vocab_size, hidden
    return {
        "embed": (V, d),
        "enc_W": (d, 3 * d),
        "enc_U": (d, 3 * d),
        "enc_b": (3 * d,),
        "dec_W": (d, 3 * d),
        "dec_U": (d, 3 * d),
        "dec_b": (3 * d,),
        "comb_W": (2 * d, d),
        "comb_b": (d,),
        "out_W": (d, V),
        "out_b": (V,),
    }


def parameter_count(vocab_size: int, hidden: int) -> int:
    V, d = vocab_size, hidden
    return 2 * V * d + V + 14 * d * d + 7 * d


class Seq2SeqModel:
    """Parameters plus the bookkeeping the training protocol needs."""

    def __init__(self, vocab_size: int, hidden: int, params: dict[str, Tensor], seed: int | None = None):
        self.vocab_size = vocab_size
        self.hidden = hidden
        self.params = params
        self.seed = seed
        # set by NLL training or by loading a checkpoint that was NLL-trained
        self.warm_started = False

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.values.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for k, p in self.params.items():
            if k not in state:
                raise InvalidArgumentError(f"state is missing parameter {k!r}")
            v = np.asarray(state[k], dtype=np.float64)
            if v.shape != p.shape:
                raise InvalidArgumentError(f"parameter {k!r}: expected shape {p.shape}, got {v.shape}")
            p.values = v.copy()

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.values.ravel() for p in self.params.values()])

    def clone(self) -> "Seq2SeqModel":
        other = Seq2SeqModel(self.vocab_size, self.hidden,
                             {k: Tensor(p.values.copy(), requires_grad=True, name=k)
                              for k, p in self.params.items()}, self.seed)
        other.warm_started = self.warm_started
        return other

    def __repr__(self):
        return f"Seq2SeqModel(V={self.vocab_size}, d={self.hidden}, params={self.num_parameters()})"


def init_model(vocab_size: int, hidden: int, seed: int = 0) -> Seq2SeqModel:
    """Uniform(-0.08, 0.08) initialisation, reproducible from ``seed``."""
    if vocab_size < len(RESERVED):
        raise InvalidArgumentError(f"vocab_size must be >= {len(RESERVED)} (reserved ids), got {vocab_size}")
    if hidden < 1:
        raise InvalidArgumentError(f"hidden must be >= 1, got {hidden}")
    rng = np.random.default_rng(seed)
    params = {
        name: Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape), requires_grad=True, name=name)
        for name, shape in parameter_shapes(vocab_size, hidden).items()
    }
    return Seq2SeqModel(vocab_size, hidden, params, seed)


def _check_ids(model, seq, what):
    ids = [int(t) for t in seq]
    if not ids:
        raise InvalidArgumentError(f"{what} sequence is empty")
    if min(ids) < 0 or max(ids) >= model.vocab_size:
        raise InvalidArgumentError(f"{what} contains ids outside [0, {model.vocab_size})")
    return ids


def _gru(inputs: Tensor, h: Tensor, W: Tensor, U: Tensor, b: Tensor, d: int) -> list[Tensor]:
    xw = inputs @ W + b  # (T, 3d), input projections for every step at once
    states = []
    for t in range(inputs.shape[0]):
        x_t = xw[t]
        hu = h @ U
        z = (x_t[:d] + hu[:d]).sigmoid()
        r = (x_t[d:2 * d] + hu[d:2 * d]).sigmoid()
        n = (x_t[2 * d:] + r * hu[2 * d:]).tanh()
        h = (1.0 - z) * n + z * h
        states.append(h)
    return states


def forward_teacher_forced(model: Seq2SeqModel, source, target) -> Tensor:
    """Distribution rows for every target slot, decoder fed ``[bos] + target[:-1]``.

    Returns an (m x V) tensor whose rows are softmax outputs; the graph to the
    parameters is kept unless called under :func:`no_grad`.
    """
    src = _check_ids(model, source, "source")
    tgt = _check_ids(model, target, "target")
    P, d = model.params, model.hidden
    h0 = Tensor(np.zeros(d))

    enc_states = _gru(P["embed"][np.asarray(src)], h0, P["enc_W"], P["enc_U"], P["enc_b"], d)
    H = stack(enc_states)  # (n, d)

    dec_in = np.asarray([BOS] + tgt[:-1])
    dec_states = _gru(P["embed"][dec_in], enc_states[-1], P["dec_W"], P["dec_U"], P["dec_b"], d)
    S = stack(dec_states)  # (m, d)

    attn = (S @ H.T).softmax(axis=-1)
    context = attn @ H
    combined = (concat([S, context], axis=-1) @ P["comb_W"] + P["comb_b"]).tanh()
    return (combined @ P["out_W"] + P["out_b"]).softmax(axis=-1)


def predict_dist(model: Seq2SeqModel, source, target) -> np.ndarray:
    """Graph-free forward pass; returns the raw (m x V) probability array."""
    with no_grad():
        return forward_teacher_forced(model, source, target).values


def grad_norm(model: Seq2SeqModel) -> float:
    total = 0.0
    for p in model.params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def sgd_step(model: Seq2SeqModel, learning_rate: float = DEFAULT_LR, clip_norm: float = DEFAULT_CLIP) -> float:
    """Clip gradients to a global norm, apply ``theta -= lr * grad``, zero grads.

    Returns the gradient norm before clipping.
    """
    if learning_rate < 0:
        raise InvalidArgumentError(f"learning_rate must be >= 0, got {learning_rate}")
    if clip_norm <= 0:
        raise InvalidArgumentError(f"clip_norm must be positive, got {clip_norm}")
    missing = [k for k, p in model.params.items() if p.grad is None]
    if missing:
        raise StateError(f"no gradient for parameters {missing}; call backward() first")
    norm = grad_norm(model)
    scale = clip_norm / norm if norm > clip_norm else 1.0
    for p in model.params.values():
        if learning_rate != 0:
            p.values = p.values - (learning_rate * scale) * p.grad
        p.grad = None
    return norm


def finite_diff_gradient(loss_fn, params, epsilon: float = 1e-4) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn()`` w.r.t. each tensor in ``params``.

    ``loss_fn`` takes no arguments and must be deterministic; any sampling
    inside it has to reseed from a fixed seed on every call.
    """
    if epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    if isinstance(params, Seq2SeqModel):
        params = params.parameters()
    grads = []
    for p in params:
        g = np.zeros_like(p.values)
        flat = p.values.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = float(loss_fn())
            flat[i] = orig - epsilon
            down = float(loss_fn())
            flat[i] = orig
            gflat[i] = (up - down) / (2 * epsilon)
        grads.append(g)
    return grads


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(model: Seq2SeqModel, path, vocab=None, config: dict | None = None) -> Path:
    """Write a JSON checkpoint; ``path`` may be a directory or a file name."""
    path = Path(path)
    if path.suffix != ".json":
        path = path / "checkpoint.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "vocab_size": model.vocab_size,
        "hidden": model.hidden,
        "seed": model.seed,
        "warm_started": model.warm_started,
        "vocab": list(vocab.itos) if vocab is not None else None,
        "config": config or {},
        "params": {
            k: {"shape": list(p.shape), "values": p.values.ravel().tolist()}
            for k, p in model.params.items()
        },
    }
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc))
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Return ``(model, vocab_tokens_or_None, config)``; rejects shape mismatches."""
    path = Path(path)
    if path.is_dir():
        path = path / "checkpoint.json"
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a JSON checkpoint ({exc.msg})", path=path) from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ParseError("missing or unknown checkpoint format tag", path=path)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {doc.get('version')}", path=path)
    V, d = int(doc["vocab_size"]), int(doc["hidden"])
    expected = parameter_shapes(V, d)
    stored = doc["params"]
    if set(stored) != set(expected):
        raise ParseError(f"parameter names {sorted(stored)} do not match the architecture", path=path)
    params = {}
    for name, shape in expected.items():
        entry = stored[name]
        if tuple(entry["shape"]) != shape:
            raise ParseError(f"parameter {name!r} has shape {tuple(entry['shape'])}, expected {shape}", path=path)
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != math.prod(shape):
            raise ParseError(f"parameter {name!r} has {values.size} values, expected {math.prod(shape)}", path=path)
        params[name] = Tensor(values.reshape(shape), requires_grad=True, name=name)
    model = Seq2SeqModel(V, d, params, doc.get("seed"))
    model.warm_started = bool(doc.get("warm_started", False))
    vocab = doc.get("vocab")
    if vocab is not None and len(vocab) != V:
        raise ParseError(f"vocab has {len(vocab)} entries but model expects {V}", path=path)
    return model, vocab, copy.deepcopy(doc.get("config", {}))


class Adam:
    """Adam with global-norm clipping; state is keyed by parameter name."""

    def __init__(self, model: Seq2SeqModel, learning_rate: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, clip_norm: float = DEFAULT_CLIP):
        self.model = model
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {k: np.zeros_like(p.values) for k, p in model.params.items()}
        self.v = {k: np.zeros_like(p.values) for k, p in model.params.items()}

    def step(self) -> float:
        model = self.model
        missing = [k for k, p in model.params.items() if p.grad is None]
        if missing:
            raise StateError(f"no gradient for parameters {missing}; call backward() first")
        norm = grad_norm(model)
        scale = self.clip_norm / norm if norm > self.clip_norm else 1.0
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in model.params.items():
            g = p.grad * scale
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            if self.learning_rate != 0:
                p.values = p.values - self.learning_rate * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p.grad = None
        return norm
