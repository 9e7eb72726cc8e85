import csv
import json

import numpy as np
import pytest

from rlsum.data import SyntheticTaskSpec, build_vocab, encode_corpus, generate_synthetic, split
from rlsum.errors import ConfigError, NumericalError, StateError
from rlsum.model import init_model, load_checkpoint
from rlsum.training import (
    GAMMA_GRID,
    TrainConfig,
    early_stop,
    finetune_rl,
    gamma_sweep,
    rl_loss,
    select_gamma,
    train_nll,
    validate,
    write_run_dir,
)


def corpus(rule="lead_k", n=300, **kw):
    spec = SyntheticTaskSpec(rule=rule, vocab_size=kw.pop("vocab_size", 20), source_len=(4, 8), k=3, **kw)
    raw = generate_synthetic(spec, n)
    vocab = build_vocab(raw, max_size=40)
    tr, dv, te = split(encode_corpus(raw, vocab), (0.8, 0.1, 0.1), seed=0)
    return vocab, tr, dv, te


@pytest.fixture(scope="module")
def small():
    return corpus()


def nll_cfg(**kw):
    base = dict(max_iterations=60, validate_every=20, patience=60)
    base.update(kw)
    return TrainConfig(**base)


class TestConfig:
    def test_defaults_and_round_trip(self):
        cfg = TrainConfig(objective="risk3")
        assert cfg.samplers == ("argmax", "second_best", "gumbel")
        assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    @pytest.mark.parametrize("kw,key", [
        ({"objective": "ppo"}, "objective"),
        ({"gamma": 1.5}, "gamma"),
        ({"patience": 250}, "patience"),
        ({"objective": "risk2", "samplers": ("argmax",)}, "samplers"),
        ({"learning_rate": -1.0}, "learning_rate"),
    ])
    def test_invalid(self, kw, key):
        with pytest.raises(ConfigError, match=f"^{key}:"):
            TrainConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="^colour:"):
            TrainConfig.from_dict({"colour": "red"})


class TestEarlyStop:
    @pytest.mark.parametrize("trace,patience,expected", [
        ([5, 4, 3, 3, 3, 3], 3, True),
        ([5, 4, 3, 3, 3, 2.9], 3, False),
        ([5, 4, 3], 3, False),
        ([1, 2, 3, 4], 3, True),
        ([3, 2, 1, 0], 1, False),
    ])
    def test_examples(self, trace, patience, expected):
        assert early_stop(trace, patience) is expected

    def test_scaled_ratio_in_training(self, small):
        _, tr, dv, _ = small
        res = train_nll(init_model(40, 8, seed=0), tr, nll_cfg(learning_rate=0.0, max_iterations=400))
        assert res.stop_reason == "max_iterations"
        res = train_nll(init_model(40, 8, seed=0), tr, nll_cfg(learning_rate=0.0, max_iterations=400), dev=dv)
        # flat dev loss: stops at the first validation after `patience` iterations
        assert res.stop_reason == "early_stop" and res.iterations == 60


class TestNLLTraining:
    def test_zero_learning_rate_keeps_parameters(self, small):
        _, tr, _, _ = small
        m = init_model(40, 8, seed=0)
        before = m.flat_parameters()
        train_nll(m, tr, nll_cfg(learning_rate=0.0))
        np.testing.assert_array_equal(m.flat_parameters(), before)
        assert m.warm_started

    def test_loss_trend_is_negative(self, small):
        _, tr, _, _ = small
        res = train_nll(init_model(40, 16, seed=0), tr, nll_cfg(learning_rate=1e-2, max_iterations=200))
        slope = np.polyfit(np.arange(200), res.loss_trace, 1)[0]
        assert slope < 0

    def test_learns_lead_k(self, small):
        _, tr, dv, _ = small
        m = init_model(40, 32, seed=0)
        train_nll(m, tr, TrainConfig(learning_rate=1e-2, max_iterations=1500, validate_every=500, patience=1000))
        assert validate(m, dv)["rougeL"] >= 0.9

    def test_reproducible(self, small):
        _, tr, dv, _ = small
        runs = [train_nll(init_model(40, 8, seed=1), tr, nll_cfg(), dev=dv) for _ in range(2)]
        assert runs[0].loss_trace == runs[1].loss_trace
        assert runs[0].validations == runs[1].validations

    def test_validation_records(self, small):
        _, tr, dv, _ = small
        res = train_nll(init_model(40, 8, seed=1), tr, nll_cfg(), dev=dv)
        assert [v["iteration"] for v in res.validations] == [0, 20, 40, 60]
        assert res.best_iteration in (0, 20, 40, 60)
        assert set(res.validations[0]) == {"loss", "rouge1", "rouge2", "rougeL", "iteration"}

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_parameters_abort(self, small):
        _, tr, _, _ = small
        m = init_model(40, 8, seed=0)
        m.params["out_b"].values[0] = np.inf
        with pytest.raises(NumericalError):
            train_nll(m, tr, nll_cfg(max_iterations=5))


class TestFinetune:
    def test_requires_warm_start(self, small):
        _, tr, _, _ = small
        with pytest.raises(StateError):
            finetune_rl(init_model(40, 8), tr, TrainConfig(objective="risk2", max_iterations=1))
        finetune_rl(init_model(40, 8), tr, TrainConfig(objective="risk2", max_iterations=1, allow_cold_start=True))

    @pytest.mark.parametrize("objective", ["rwb_hinge", "risk2", "risk3"])
    def test_gamma_one_reproduces_nll(self, small, objective):
        _, tr, _, _ = small
        a, b = init_model(40, 8, seed=2), init_model(40, 8, seed=2)
        ra = train_nll(a, tr, nll_cfg(max_iterations=50))
        b.warm_started = True
        rb = finetune_rl(b, tr, nll_cfg(objective=objective, gamma=1.0, max_iterations=50))
        np.testing.assert_allclose(rb.loss_trace, ra.loss_trace, rtol=0, atol=1e-9)

    def test_hinge_blocks_losing_samples(self, small):
        _, tr, _, _ = small
        m = init_model(40, 8, seed=0)
        cfg = TrainConfig(objective="rwb_hinge", gamma=0.0)
        rng = np.random.default_rng(0)
        seen = 0
        for ex in tr[:40]:
            loss, info = rl_loss(m, ex, cfg, rng)
            if info["rewards"]["gumbel"] <= info["rewards"]["argmax"]:
                assert loss.value == 0.0
                seen += 1
        assert seen > 0

    def test_rl_info(self, small):
        _, tr, _, _ = small
        loss, info = rl_loss(init_model(40, 8), tr[0], TrainConfig(objective="risk3"), np.random.default_rng(0))
        assert set(info["rewards"]) == {"argmax", "second_best", "gumbel"}
        assert loss.kind == "mixed"


def test_gamma_sweep_rows(small):
    _, tr, dv, _ = small
    warm = init_model(40, 8, seed=0)
    warm.warm_started = True
    rows = gamma_sweep(warm.clone, tr, dv, config=TrainConfig(max_iterations=10))
    assert [r["gamma"] for r in rows] == list(GAMMA_GRID)
    assert all(r["iterations"] == 10 for r in rows)
    assert select_gamma(rows) in GAMMA_GRID


def test_select_gamma_ties_low():
    rows = [{"gamma": 0.9, "rougeL": 0.5}, {"gamma": 0.3, "rougeL": 0.5}, {"gamma": 0.1, "rougeL": 0.4}]
    assert select_gamma(rows) == 0.3


def test_run_dir(tmp_path, small):
    vocab, tr, dv, _ = small
    m = init_model(len(vocab), 8, seed=0)
    cfg = nll_cfg()
    res = train_nll(m, tr, cfg, dev=dv)
    out = write_run_dir(tmp_path / "run", res, m, cfg.to_dict(), vocab=vocab)
    for name in ("config.json", "checkpoint.json", "best_checkpoint.json", "trace.csv", "result.json"):
        assert (out / name).exists()
    with (out / "trace.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    # iteration 0 carries only the initial validation
    assert len(rows) == res.iterations + 1
    assert rows[0]["loss"] == "" and rows[0]["dev_loss"] != ""
    _, loaded_vocab, _ = load_checkpoint(out / "checkpoint.json")
    assert loaded_vocab == vocab.itos
