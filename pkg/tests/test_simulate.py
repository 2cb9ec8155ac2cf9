import numpy as np
import pytest

from ttslabel.decode import greedy_decode
from ttslabel.errors import UnknownToken
from ttslabel.labels import PROSODY_SURFACES, Kind, Vocabulary, parse_mixed
from ttslabel.lattice import build_lattice, matches
from ttslabel.simulate import SimConfig, random_labels, synthesize, synthetic_corpus

V = Vocabulary(["ka", "ba", "ga", "ku", "ke", "[", "#"])


def test_clean_round_trip():
    truth = parse_mixed("ka [ ka ga # ku")
    for seed in range(20):
        em = synthesize(truth, V, SimConfig(rng_seed=seed))
        assert greedy_decode(em).sequence == truth


def test_repeat_gets_separator():
    em = synthesize(parse_mixed("ka ka"), V, SimConfig(blank_insert_prob=0.0, frames_per_token=(1, 1)))
    assert em.argmax().tolist() == [V.id_of("ka"), V.blank_id, V.id_of("ka")]


def test_full_confusion_swaps_partner():
    cfg = SimConfig(confusion_eps=1.0, confusion_pairs=(("ka", "ba"),))
    em = synthesize(parse_mixed("ka ga"), V, cfg)
    assert greedy_decode(em).labels().split()[0] == "ba"


def test_flip_rate_tracks_eps():
    cfg = SimConfig(confusion_eps=0.3, confusion_pairs=(("ka", "ba"),), frames_per_token=(1, 1))
    flips = 0
    for seed in range(400):
        em = synthesize(parse_mixed("ka"), V, SimConfig(**{**cfg.__dict__, "rng_seed": seed}))
        flips += greedy_decode(em).labels() == "ba"
    assert 0.22 < flips / 400 < 0.38


def test_unpartnered_phoneme_stays_a_phoneme():
    pros = set(V.ids_of_kind(Kind.PROSODY))
    for seed in range(200):
        em = synthesize(parse_mixed("ku"), V, SimConfig(confusion_eps=0.9, rng_seed=seed))
        assert not pros & set(em.argmax().tolist())
    hits = 0
    for seed in range(200):
        em = synthesize(parse_mixed("ku"), V, SimConfig(confusion_eps=0.9, rng_seed=seed, confuse_prosody=True))
        hits += bool(pros & set(em.argmax().tolist()))
    assert hits > 0


def test_deterministic():
    truth = parse_mixed("ka [ ga ku")
    cfg = SimConfig(confusion_eps=0.3, confusion_pairs=(("ka", "ga"),), rng_seed=3)
    assert synthesize(truth, V, cfg).to_bytes() == synthesize(truth, V, cfg).to_bytes()


def test_unknown_token():
    with pytest.raises(UnknownToken):
        synthesize(parse_mixed("zo"), V, SimConfig())


def test_bad_config():
    with pytest.raises(ValueError):
        SimConfig(frames_per_token=(0, 2))
    with pytest.raises(ValueError):
        SimConfig(confusion_eps=1.5)


def test_corpus_truth_is_a_reading():
    corpus = synthetic_corpus(50, seed=2)
    for u in corpus.utterances:
        assert matches(build_lattice(u.grapheme, corpus.dictionary), u.truth.phonemes())
        for t in u.truth:
            assert t.surface in corpus.vocab.index


def test_random_labels_in_vocab():
    rng = np.random.default_rng(0)
    for _ in range(50):
        seq = random_labels(rng, ["ka", "ga"])
        assert all(t.surface in ("ka", "ga") + PROSODY_SURFACES for t in seq)
