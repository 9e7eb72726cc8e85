import json

import pytest

from rlsum.cli import COMMANDS, build_parser, main

FAST = ["max_iterations=40", "validate_every=20", "patience=40", "hidden=8"]


@pytest.fixture
def corpus(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"rule": "lead_k", "vocab_size": 12, "source_len": [4, 8], "k": 3}))
    out = tmp_path / "data" / "corpus.jsonl"
    assert main(["gen-data", "--spec", str(spec), "--n", "120", "--out", str(out)]) == 0
    return out


@pytest.fixture
def warm(tmp_path, corpus):
    out = tmp_path / "warm"
    assert main(["train", "--data", str(corpus), "--out", str(out), *FAST]) == 0
    return out


def test_gen_data(corpus):
    assert len(corpus.read_text().splitlines()) == 120
    resolved = json.loads((corpus.parent / "config_resolved.json").read_text())
    assert resolved["n"] == 120 and resolved["spec"]["rule"] == "lead_k"


def test_train_run_dir(warm):
    for name in ("config_resolved.json", "checkpoint.json", "trace.csv", "result.json"):
        assert (warm / name).exists()


def test_finetune_recipe(tmp_path, warm):
    out = tmp_path / "ft"
    code = main(["finetune", "--objective", "risk3", "--gamma", "0.9", "--warm-start", str(warm),
                 "--out", str(out), *FAST])
    assert code == 0
    assert (out / "trace.csv").exists()
    resolved = json.loads((out / "config_resolved.json").read_text())
    assert resolved["objective"] == "risk3" and resolved["gamma"] == 0.9
    # the data location is inherited from the warm-start checkpoint
    assert resolved["data"].endswith("corpus.jsonl")


def test_same_seed_same_outputs(tmp_path, corpus):
    dirs = [tmp_path / f"run{i}" for i in range(2)]
    for d in dirs:
        assert main(["train", "--data", str(corpus), "--out", str(d), "--seed", "3", *FAST]) == 0
    for f in sorted(p.name for p in dirs[0].iterdir()):
        text = [(d / f).read_text().replace(str(d), "") for d in dirs]
        assert text[0] == text[1], f


def test_sweep_evaluate_analyze(tmp_path, warm):
    sw = tmp_path / "sw"
    assert main(["sweep-gamma", "--warm-start", str(warm), "--grid", "0.5,0.9", "--out", str(sw),
                 "--format", "json", "max_iterations=5"]) == 0
    rows = json.loads((sw / "sweep.json").read_text())
    assert [r["gamma"] for r in rows] == [0.5, 0.9]
    capped = tmp_path / "capped"
    assert main(["sweep-gamma", "--warm-start", str(warm), "--grid", "0.9", "--out", str(capped)]) == 0
    # without max_iterations the sweep gets the warm start's budget
    assert json.loads((capped / "config_resolved.json").read_text())["max_iterations"] == 40
    ev = tmp_path / "ev"
    assert main(["evaluate", "--checkpoint", str(warm), "--out", str(ev)]) == 0
    assert (ev / "metrics.csv").read_text().startswith("system,")
    an = tmp_path / "an"
    assert main(["analyze", "--baseline", str(warm), "--system", f"again={warm}", "--out", str(an),
                 "resamples=1000"]) == 0
    for name in ("metrics.csv", "novelty.csv", "length_buckets.csv"):
        assert (an / name).exists()


def test_seed_from_environment(tmp_path, corpus, monkeypatch):
    monkeypatch.setenv("RLSUM_SEED", "77")
    out = tmp_path / "env"
    assert main(["train", "--data", str(corpus), "--out", str(out), "max_iterations=0"]) == 0
    assert json.loads((out / "config_resolved.json").read_text())["seed"] == 77
    out2 = tmp_path / "flag"
    assert main(["train", "--data", str(corpus), "--out", str(out2), "--seed", "5", "max_iterations=0"]) == 0
    assert json.loads((out2 / "config_resolved.json").read_text())["seed"] == 5


def test_precedence(tmp_path, corpus):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden": 6, "learning_rate": 0.01, "max_iterations": 0}))
    out = tmp_path / "p"
    assert main(["train", "--config", str(cfg), "--data", str(corpus), "--out", str(out), "hidden=4"]) == 0
    resolved = json.loads((out / "config_resolved.json").read_text())
    assert resolved["hidden"] == 4 and resolved["learning_rate"] == 0.01 and resolved["validate_every"] == 200


def test_missing_config_file(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["train", "--config", str(missing), "--out", str(tmp_path / "x")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_data_file(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "x")]) == 2
    assert "none.jsonl" in capsys.readouterr().err


@pytest.mark.parametrize("argv,needle", [
    (["train", "colour=red"], "colour"),
    (["train", "gamma=2"], "gamma"),
    (["finetune"], "warm_start"),
    (["train", "patience=250"], "patience"),
])
def test_config_errors(tmp_path, capsys, argv, needle):
    assert main([*argv[:1], "--out", str(tmp_path / "o"), *argv[1:]]) == 1
    assert needle in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["shuffle"]) == 1
    assert main(["train", "--bogus"]) == 1
    assert main(["finetune", "--objective", "ppo"]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure(tmp_path, warm):
    ckpt = json.loads((warm / "checkpoint.json").read_text())
    ckpt["params"]["out_b"]["values"][0] = float("nan")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(ckpt))
    out = tmp_path / "nan"
    assert main(["finetune", "--warm-start", str(bad), "--out", str(out), *FAST]) == 3
    assert (out / "config_resolved.json").exists()


@pytest.mark.parametrize("command", COMMANDS)
def test_help_lists_flags(command, capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--out"):
        assert flag in text
