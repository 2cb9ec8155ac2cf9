import numpy as np
import pytest

from ttslabel import emission
from ttslabel.emission import EmissionMatrix, filter_nonblank_frames
from ttslabel.errors import VocabMismatch
from ttslabel.labels import Vocabulary

from oracles import random_rows

V = Vocabulary(["ka", "ga", "["])


def test_rows_must_be_normalized():
    with pytest.raises(ValueError):
        EmissionMatrix(np.zeros((2, 4)), V)
    with pytest.raises(VocabMismatch):
        EmissionMatrix(np.log(np.full((1, 3), 1 / 3)), V)
    EmissionMatrix(np.log(np.full((2, 4), 0.25)), V)


def test_empty_matrix():
    em = EmissionMatrix(np.zeros((0, 4)), V)
    assert em.num_frames == 0
    sub, idx = filter_nonblank_frames(em)
    assert sub.num_frames == 0 and idx.size == 0


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    em = EmissionMatrix(random_rows(rng, 7, 4), V)
    em.save(tmp_path / "e.emit")
    raw = (tmp_path / "e.emit").read_bytes()
    assert raw[:5] == b"EMIT1"
    assert int.from_bytes(raw[5:9], "little") == 7 and int.from_bytes(raw[9:13], "little") == 4
    assert len(raw) == 13 + 7 * 4 * 4
    back = emission.load(tmp_path / "e.emit", V)
    assert np.allclose(back.logp, em.logp, atol=1e-6)
    assert (back.argmax() == em.argmax()).all()


def test_bad_binary():
    with pytest.raises(ValueError):
        emission.from_bytes(b"EMIT1" + (2).to_bytes(4, "little") + (4).to_bytes(4, "little") + b"\0" * 8, V)


def test_tsv_with_column_subset(tmp_path):
    text = "ka\t<blank>\n-0.1053605157\t-2.302585093\n"
    em = emission.read_tsv(text, V)
    assert em.logp.shape == (1, 4)
    assert em.logp[0, V.id_of("ga")] == -np.inf
    (tmp_path / "e.tsv").write_text(emission.write_tsv(em), encoding="utf-8")
    assert np.array_equal(emission.load(tmp_path / "e.tsv", V).logp, em.logp)


def test_filter_examples():
    b, ka, ga = V.blank_id, V.id_of("ka"), V.id_of("ga")
    def onehot(ids):
        p = np.full((len(ids), 4), 0.01)
        p[np.arange(len(ids)), ids] = 0.97
        return EmissionMatrix.from_probs(p, V)

    sub, idx = filter_nonblank_frames(onehot([b, ka, b, ga]))
    assert idx.tolist() == [1, 3] and sub.argmax().tolist() == [ka, ga]
    sub, idx = filter_nonblank_frames(onehot([b, b]))
    assert sub.num_frames == 0
    em = onehot([ka, ga, ka])
    sub, idx = filter_nonblank_frames(em)
    assert idx.tolist() == [0, 1, 2] and np.array_equal(sub.logp, em.logp)
