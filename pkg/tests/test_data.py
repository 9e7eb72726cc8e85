import json
import logging

import pytest

from rlsum.data import (
    Example,
    SyntheticTaskSpec,
    Vocabulary,
    build_vocab,
    encode_corpus,
    generate_synthetic,
    load_jsonl,
    rule_oracle,
    split,
    write_jsonl,
)
from rlsum.errors import InvalidArgumentError, ParseError
from rlsum.model import UNK
from rlsum.text_metrics import rouge_l_f1


def test_lead_k_rule():
    spec = SyntheticTaskSpec(rule="lead_k", k=3, source_len=(4, 4), vocab_size=10)
    for ex in generate_synthetic(spec, 20):
        assert ex.summary == ex.source[:3]


def test_keyword_extract_rule():
    spec = SyntheticTaskSpec(rule="keyword_extract", vocab_size=20, n_keywords=5)
    keywords = {spec.word(i) for i in range(5)}
    for ex in generate_synthetic(spec, 50):
        assert list(ex.summary) == [w for w in ex.source if w in keywords][:spec.max_target_tokens]


def test_sorted_unique_rule():
    spec = SyntheticTaskSpec(rule="sorted_unique", vocab_size=12, source_len=(3, 10))
    for ex in generate_synthetic(spec, 30):
        assert list(ex.summary) == sorted(set(ex.source))


@pytest.mark.parametrize("rule", ["lead_k", "keyword_extract", "sorted_unique"])
def test_noise_free_oracle_is_perfect(rule):
    spec = SyntheticTaskSpec(rule=rule, vocab_size=15, n_keywords=5, source_len=(3, 12))
    for ex in generate_synthetic(spec, 100):
        assert rouge_l_f1(ex.summary, rule_oracle(spec, ex)).f1 == 1.0


def test_same_seed_same_corpus(tmp_path):
    spec = SyntheticTaskSpec(noise_rate=0.3, seed=4)
    a = write_jsonl(generate_synthetic(spec, 40), tmp_path / "a.jsonl").read_bytes()
    b = write_jsonl(generate_synthetic(spec, 40), tmp_path / "b.jsonl").read_bytes()
    assert a == b


def test_noise_uses_synonyms_absent_from_sources():
    spec = SyntheticTaskSpec(noise_rate=0.4, n_synonyms=2, seed=1)
    corpus = generate_synthetic(spec, 300)
    source_words = {w for ex in corpus for w in ex.source}
    syn = [w for ex in corpus for w in ex.summary if w.startswith("s")]
    assert syn
    assert not source_words.intersection(syn)
    # noise does not change the sources
    clean = generate_synthetic(SyntheticTaskSpec(noise_rate=0.0, n_synonyms=2, seed=1), 300)
    assert [ex.source for ex in clean] == [ex.source for ex in corpus]


@pytest.mark.parametrize("kwargs", [
    {"noise_rate": 0.5},
    {"rule": "shuffle"},
    {"source_len": (5, 4)},
    {"rule": "lead_k", "k": 9, "source_len": (4, 10)},
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidArgumentError):
        SyntheticTaskSpec(**kwargs)


def test_spec_dict_round_trip():
    spec = SyntheticTaskSpec(noise_rate=0.2, seed=3)
    assert SyntheticTaskSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    with pytest.raises(InvalidArgumentError):
        SyntheticTaskSpec.from_dict({"colour": 1})


def test_jsonl_round_trip(tmp_path):
    corpus = generate_synthetic(SyntheticTaskSpec(noise_rate=0.3), 60)
    loaded = load_jsonl(write_jsonl(corpus, tmp_path / "c.jsonl"))
    assert [(e.source, e.summary, e.id) for e in loaded] == [(e.source, e.summary, e.id) for e in corpus]


class TestLoadJsonl:
    def test_schema_example(self, tmp_path):
        p = tmp_path / "x.jsonl"
        p.write_text('{"source": "a b", "summary": "a"}\n')
        (ex,) = load_jsonl(p)
        assert ex.source == ("a", "b") and ex.summary == ("a",)

    def test_empty_file_warns(self, tmp_path, caplog):
        p = tmp_path / "empty.jsonl"
        p.write_text("")
        with caplog.at_level(logging.WARNING):
            assert load_jsonl(p) == []
        assert "empty" in caplog.text

    def test_strict_names_line(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"source": "a", "summary": "a"}\n{"source": "b"}\n')
        with pytest.raises(ParseError, match=":2:"):
            load_jsonl(p, strict=True)

    def test_lenient_skips(self, tmp_path, caplog):
        p = tmp_path / "bad.jsonl"
        p.write_text('not json\n{"source": "a", "summary": "a"}\n{"source": 3, "summary": "x"}\n')
        with caplog.at_level(logging.WARNING):
            assert len(load_jsonl(p)) == 1
        assert ":1:" in caplog.text and ":3:" in caplog.text

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_jsonl(tmp_path / "nope.jsonl")

    def test_token_caps(self, tmp_path):
        p = tmp_path / "long.jsonl"
        p.write_text(json.dumps({"source": " ".join(["x"] * 100), "summary": " ".join(["y"] * 30)}) + "\n")
        (ex,) = load_jsonl(p)
        assert len(ex.source) == 64 and len(ex.summary) == 16


class TestVocab:
    def test_frequency_then_lexicographic(self):
        v = build_vocab([["b", "a", "a", "c"], ["c"]])
        assert v.itos[4:] == ["a", "c", "b"]

    def test_unknown_maps_to_unk(self):
        v = build_vocab([["a", "b"]])
        assert v.encode(["a", "zzz"]).tokens == (v.stoi["a"], UNK) and UNK == 3

    def test_size_cap(self):
        v = build_vocab([list("abcdefgh")], max_size=6)
        assert len(v) == 6

    def test_small_max_size(self):
        with pytest.raises(InvalidArgumentError):
            build_vocab([["a"]], max_size=4)

    def test_reserved_prefix(self):
        with pytest.raises(InvalidArgumentError):
            Vocabulary(["a", "b"])

    def test_encode_corpus(self):
        corpus = [Example(("a", "b"), ("a",), "x")]
        (enc,) = encode_corpus(corpus, build_vocab(corpus))
        assert enc.summary.vocab_size == 6 and enc.raw is corpus[0]


class TestSplit:
    def test_partition(self):
        corpus = list(range(101))
        tr, dv, te = split(corpus, (0.7, 0.2, 0.1), seed=3)
        assert sorted(tr + dv + te) == corpus
        assert not (set(tr) & set(dv) or set(tr) & set(te) or set(dv) & set(te))

    def test_all_train(self):
        tr, dv, te = split(list(range(10)), (1, 0, 0))
        assert len(tr) == 10 and dv == [] and te == []

    def test_deterministic(self):
        assert split(list(range(50)), seed=9) == split(list(range(50)), seed=9)

    def test_bad_fractions(self):
        with pytest.raises(InvalidArgumentError):
            split(list(range(10)), (0.5, 0.2, 0.2))

    def test_few_shot(self):
        tr, _, _ = split(list(range(1500)), (0.8, 0.1, 0.1), few_shot=True)
        assert len(tr) == 1000
        with pytest.raises(InvalidArgumentError):
            split(list(range(100)), few_shot=True)
