"""Command-line interface: ``rlsum <command> [flags] [key=value ...]``.

Settings are merged as defaults < RLSUM_SEED < config file < key=value
overrides < explicit flags. Every command writes ``config_resolved.json``
before doing any work.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis
from .data import (
    SyntheticTaskSpec,
    build_vocab,
    encode_corpus,
    generate_synthetic,
    load_jsonl,
    split,
    write_jsonl,
    Vocabulary,
)
from .errors import ConfigError, InvalidArgumentError, NumericalError, ParseError
from .experiment import default_task
from .model import init_model, load_checkpoint
from .training import (
    GAMMA_GRID,
    TrainConfig,
    decode_corpus,
    finetune_rl,
    gamma_sweep,
    select_gamma,
    train_nll,
    validate,
    write_run_dir,
)
from .text_metrics import rouge_scores

log = logging.getLogger("rlsum")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("gen-data", "train", "finetune", "sweep-gamma", "evaluate", "analyze")
OBJECTIVE_FLAGS = {"nll": "nll", "rwb-hinge": "rwb_hinge", "risk2": "risk2", "risk3": "risk3"}

# data keys travel with a checkpoint so later commands see the same split
DATA_KEYS = ("data", "spec", "n", "fractions", "split_seed", "vocab_size")

DEFAULTS = {
    "seed": 13,
    "data": None,
    "spec": None,
    "n": 2500,
    "fractions": [0.8, 0.1, 0.1],
    "split_seed": 0,
    "vocab_size": 50,
    "hidden": 32,
    "objective": "nll",
    "gamma": 0.9,
    "learning_rate": 3e-3,
    "optimizer": "adam",
    "clip_norm": 1.0,
    "max_iterations": 6000,
    "validate_every": 200,
    "patience": 600,
    "few_shot": False,
    "temperature": 0.1,
    "grid": list(GAMMA_GRID),
    "format": "csv",
    "resamples": analysis.DEFAULT_RESAMPLES,
    "warm_start": None,
    "checkpoint": None,
    "baseline": None,
    "systems": {},
    "out": None,
}
COMMAND_DEFAULTS = {
    "finetune": {"objective": "risk2", "learning_rate": 1e-3, "max_iterations": 2000},
    # None: capped at the warm-start run's iteration count
    "sweep-gamma": {"learning_rate": 1e-3, "max_iterations": None},
}
TRAIN_KEYS = ("objective", "gamma", "learning_rate", "optimizer", "clip_norm", "max_iterations",
              "validate_every", "patience", "few_shot", "seed", "temperature")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_overrides(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{item}: overrides must look like key=value")
        out[key] = _parse_value(value)
    return out


def _read_json(path, what: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {what} {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: {what} must be a JSON object")
    return doc


def _flag_values(args) -> dict:
    out = {}
    for key in ("seed", "out", "gamma", "format", "spec", "n", "data", "warm_start", "checkpoint", "baseline"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if getattr(args, "objective", None):
        out["objective"] = OBJECTIVE_FLAGS[args.objective]
    if getattr(args, "few_shot", False):
        out["few_shot"] = True
    if getattr(args, "grid", None):
        try:
            out["grid"] = [float(g) for g in args.grid.split(",")]
        except ValueError as exc:
            raise ConfigError(f"grid: expected comma-separated numbers, got {args.grid!r}") from exc
    if getattr(args, "system", None):
        out["systems"] = _parse_systems(args.system)
    return out


def _parse_systems(items) -> dict:
    systems = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"systems: expected NAME=CHECKPOINT, got {item!r}")
        systems[name] = path
    return systems


def resolve_config(command: str, args) -> dict:
    """Merge every configuration layer for ``command``."""
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    env_seed = os.environ.get("RLSUM_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"RLSUM_SEED: expected an integer, got {env_seed!r}") from exc
    layers = []
    if args.config:
        layers.append(_read_json(args.config, "config file"))
    layers.append(_parse_overrides(args.overrides))
    layers.append(_flag_values(args))
    explicit = {}
    for layer in layers:
        explicit.update(layer)
    # data settings default to whatever the source checkpoint was trained on
    source = explicit.get("warm_start") or explicit.get("checkpoint") or explicit.get("baseline")
    if source and command != "train":
        _, _, ckpt_cfg = load_checkpoint(source)
        for key in DATA_KEYS:
            if key in (ckpt_cfg or {}):
                cfg[key] = ckpt_cfg[key]
    for key, value in explicit.items():
        if key not in DEFAULTS:
            raise ConfigError(f"{key}: unknown configuration key")
        cfg[key] = value
    if isinstance(cfg["spec"], str):
        cfg["spec"] = _read_json(cfg["spec"], "synthetic spec")
    if cfg["out"] is None:
        raise ConfigError("out: an output path is required (--out)")
    cfg["command"] = command
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(**{k: cfg[k] for k in TRAIN_KEYS})
    except TypeError as exc:
        raise ConfigError(f"training: {exc}") from exc


def _task(cfg) -> SyntheticTaskSpec:
    if cfg["spec"] is None:
        return default_task()
    try:
        return SyntheticTaskSpec.from_dict(cfg["spec"])
    except (InvalidArgumentError, TypeError) as exc:
        raise ConfigError(f"spec: {exc}") from exc


def _corpus(cfg):
    if cfg["data"]:
        return load_jsonl(cfg["data"])
    return generate_synthetic(_task(cfg), int(cfg["n"]))


def _splits(cfg, vocab: Vocabulary | None = None):
    corpus = _corpus(cfg)
    if not corpus:
        raise ConfigError(f"data: corpus {cfg['data']} has no usable examples")
    try:
        train, dev, test = split(corpus, cfg["fractions"], seed=int(cfg["split_seed"]))
    except InvalidArgumentError as exc:
        raise ConfigError(f"fractions: {exc}") from exc
    if vocab is None:
        vocab = build_vocab(train, int(cfg["vocab_size"]))
    return vocab, encode_corpus(train, vocab), encode_corpus(dev, vocab), encode_corpus(test, vocab)


def _load(path):
    model, itos, ckpt_cfg = load_checkpoint(path)
    if itos is None:
        raise ParseError("checkpoint has no vocabulary", path=path)
    return model, Vocabulary(list(itos)), ckpt_cfg


def _write_resolved(cfg: dict, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config_resolved.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg) -> Path:
    return Path(cfg["out"])


def _write_table(rows: list[dict], path: Path, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n")
        return path
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


# -- commands -----------------------------------------------------------------

def cmd_gen_data(cfg):
    out = Path(cfg["out"])
    _write_resolved(cfg, out.parent)
    corpus = generate_synthetic(_task(cfg), int(cfg["n"]))
    write_jsonl(corpus, out)
    log.info("wrote %d examples to %s", len(corpus), out)


def cmd_train(cfg):
    out = _out_dir(cfg)
    _write_resolved(cfg, out)
    tcfg = _train_config({**cfg, "objective": "nll"})
    vocab, train, dev, _ = _splits(cfg)
    model = init_model(len(vocab), int(cfg["hidden"]), tcfg.seed)
    result = train_nll(model, train, tcfg, dev=dev)
    write_run_dir(out, result, model, cfg, vocab=vocab)
    log.info("nll training stopped after %d iterations (%s)", result.iterations, result.stop_reason)


def cmd_finetune(cfg):
    out = _out_dir(cfg)
    _write_resolved(cfg, out)
    if not cfg["warm_start"]:
        raise ConfigError("warm_start: finetune needs --warm-start CHECKPOINT")
    tcfg = _train_config(cfg)
    if tcfg.objective == "nll":
        raise ConfigError("objective: finetune needs an RL objective")
    model, vocab, _ = _load(cfg["warm_start"])
    _, train, dev, _ = _splits(cfg, vocab)
    result = finetune_rl(model, train, tcfg, dev=dev)
    write_run_dir(out, result, model, cfg, vocab=vocab)
    log.info("%s fine-tuning stopped after %d iterations (%s)", tcfg.objective, result.iterations,
             result.stop_reason)


def _warm_iterations(path) -> int:
    path = Path(path)
    run_dir = path if path.is_dir() else path.parent
    summary = run_dir / "result.json"
    if not summary.exists():
        raise ConfigError(f"max_iterations: not set and {summary} is missing, so the warm-start budget is unknown")
    iterations = json.loads(summary.read_text()).get("iterations")
    if not iterations:
        raise ConfigError(f"max_iterations: {summary} records no iterations")
    return int(iterations)


def cmd_sweep_gamma(cfg):
    out = _out_dir(cfg)
    _write_resolved(cfg, out)
    if not cfg["warm_start"]:
        raise ConfigError("warm_start: sweep-gamma needs --warm-start CHECKPOINT")
    warm, vocab, _ = _load(cfg["warm_start"])
    _, train, dev, _ = _splits(cfg, vocab)
    if cfg["max_iterations"] is None:
        cfg = {**cfg, "max_iterations": _warm_iterations(cfg["warm_start"])}
        _write_resolved(cfg, out)
    tcfg = _train_config({**cfg, "objective": "reinforce"})
    try:
        rows = gamma_sweep(warm.clone, train, dev, cfg["grid"], tcfg)
    except InvalidArgumentError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    path = _write_table(rows, out / "sweep", cfg["format"])
    (out / "selected_gamma.json").write_text(json.dumps({"gamma": select_gamma(rows)}) + "\n")
    log.info("wrote %s", path)


def _decode_and_score(model, test):
    decodes = decode_corpus(model, test)
    per = [rouge_scores(ex.summary.tokens, hyp) for ex, hyp in zip(test, decodes)]
    return decodes, per


def cmd_evaluate(cfg):
    out = _out_dir(cfg)
    _write_resolved(cfg, out)
    if not cfg["checkpoint"]:
        raise ConfigError("checkpoint: evaluate needs --checkpoint CHECKPOINT")
    model, vocab, _ = _load(cfg["checkpoint"])
    _, _, _, test = _splits(cfg, vocab)
    if not test:
        raise ConfigError("fractions: the test split is empty")
    metrics = validate(model, test)
    metrics.pop("iteration", None)
    metrics["n"] = len(test)
    analysis.emit_report({"test": metrics}, out / f"metrics.{cfg['format']}", cfg["format"])
    decodes = decode_corpus(model, test)
    with (out / "decodes.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
        for ex, hyp in zip(test, decodes):
            fh.write(json.dumps({"id": ex.id, "summary": " ".join(vocab.decode(hyp))}) + "\n")


def cmd_analyze(cfg):
    out = _out_dir(cfg)
    _write_resolved(cfg, out)
    if not cfg["baseline"]:
        raise ConfigError("baseline: analyze needs --baseline CHECKPOINT")
    if not isinstance(cfg["systems"], dict) or not cfg["systems"]:
        raise ConfigError("systems: analyze needs at least one --system NAME=CHECKPOINT")
    base_model, vocab, _ = _load(cfg["baseline"])
    _, _, _, test = _splits(cfg, vocab)
    if len(test) < 2:
        raise ConfigError("fractions: the test split needs at least 2 examples")
    models = {"baseline": base_model}
    for name, path in cfg["systems"].items():
        models[name], sys_vocab, _ = _load(path)
        if sys_vocab.itos != vocab.itos:
            raise ConfigError(f"systems: {name} ({path}) uses a different vocabulary than the baseline")
    decodes, scores = {}, {}
    for name, model in models.items():
        decodes[name], scores[name] = _decode_and_score(model, test)
    table = {}
    for name in models:
        table[name] = {m: sum(s[m] for s in scores[name]) / len(test) for m in ("rouge1", "rouge2", "rougeL")}
        if name != "baseline":
            res = analysis.bootstrap_test(
                analysis.PairedScores([s["rougeL"] for s in scores[name]], [s["rougeL"] for s in scores["baseline"]]),
                resamples=int(cfg["resamples"]), seed=int(cfg["seed"]))
            table[name].update(p_value=res.p_value, significant=res.significant)
    fmt = cfg["format"]
    analysis.emit_report(table, out / f"metrics.{fmt}", fmt)
    nov = analysis.novelty_profile([ex.source.tokens for ex in test], decodes)
    analysis.emit_report(nov.as_rows(), out / f"novelty.{fmt}", fmt)
    refs = [ex.summary.tokens for ex in test]
    buckets = {name: {r["bucket"]: r["mean_rougeL"] for r in analysis.length_bucket_rouge(refs, hyps)}
               for name, hyps in decodes.items()}
    analysis.emit_report(buckets, out / f"length_buckets.{fmt}", fmt)


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "finetune": cmd_finetune,
    "sweep-gamma": cmd_sweep_gamma,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rlsum", description="Train and analyse RL-fine-tuned summarisers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "gen-data": "write a synthetic corpus as JSONL",
        "train": "NLL warm start",
        "finetune": "RL fine-tuning from a warm-start checkpoint",
        "sweep-gamma": "dev ROUGE for each mixing weight in a grid",
        "evaluate": "test-split ROUGE for one checkpoint",
        "analyze": "significance, novelty and length buckets against a baseline",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                       help="log progress to stderr")
        p.add_argument("--config", help="JSON config file", default=None)
        p.add_argument("--seed", type=int, default=None,
                       help=f"random seed (falls back to RLSUM_SEED, then {DEFAULTS['seed']})")
        p.add_argument("--out", default=None, help="output file (gen-data) or directory")
        p.add_argument("overrides", nargs="*", default=[], metavar="key=value", help="configuration overrides")
        if name == "gen-data":
            p.add_argument("--spec", default=None, help="synthetic task spec (JSON file)")
            p.add_argument("--n", type=int, default=None, help=f"number of examples (default {DEFAULTS['n']})")
            continue
        p.add_argument("--data", default=None, help="JSONL corpus; a synthetic task is generated when absent")
        p.add_argument("--spec", default=None, help="synthetic task spec (JSON file) used without --data")
        p.add_argument("--n", type=int, default=None, help="synthetic corpus size")
        if name in ("train", "finetune", "sweep-gamma"):
            p.add_argument("--few-shot", action="store_true", help="1000 training examples, fixed budget")
        if name == "finetune":
            p.add_argument("--objective", choices=list(OBJECTIVE_FLAGS)[1:], default=None,
                           help="RL objective (default risk2)")
        if name == "train":
            p.add_argument("--objective", choices=["nll"], default=None, help="training objective")
        if name in ("finetune", "sweep-gamma"):
            p.add_argument("--warm-start", dest="warm_start", default=None, help="NLL checkpoint file or run directory")
        if name == "finetune":
            p.add_argument("--gamma", type=float, default=None, help=f"NLL weight (default {DEFAULTS['gamma']})")
        if name == "sweep-gamma":
            p.add_argument("--grid", default=None,
                           help="comma-separated gamma values (default " + ",".join(map(str, GAMMA_GRID)) + ")")
        if name in ("sweep-gamma", "evaluate", "analyze"):
            p.add_argument("--format", choices=["csv", "json"], default=None, help="report format (default csv)")
        if name == "evaluate":
            p.add_argument("--checkpoint", default=None, help="checkpoint file or run directory")
        if name == "analyze":
            p.add_argument("--baseline", default=None, help="baseline checkpoint")
            p.add_argument("--system", action="append", default=None, metavar="NAME=CHECKPOINT",
                           help="system to compare (repeatable)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        HANDLERS[args.command](cfg)
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
