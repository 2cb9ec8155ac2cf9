import json
import logging
import re

import pytest

from ttslabel.cli import main
from ttslabel.dictionary import G2pDictionary

TOY = "化学\tka ga ku\n化学\tba ke ga ku\n学\tga ku\n"


@pytest.fixture
def toy(tmp_path):
    p = tmp_path / "pairs.tsv"
    p.write_text(TOY, encoding="utf-8")
    return p


@pytest.fixture
def files(tmp_path, kagaku_vocab, kagaku_dict):
    kagaku_vocab.save(tmp_path / "vocab.txt")
    kagaku_dict.save(tmp_path / "dict.tsv")
    (tmp_path / "labels.txt").write_text("u1\tka [ ga ku\nu2\tba ke # ga ku\n", encoding="utf-8")
    (tmp_path / "graphemes.txt").write_text("u1\t化学\nu2\t化学\n", encoding="utf-8")
    return tmp_path


def test_help_documents_formats(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["decode", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "EMIT1" in out and "manifest" in out


def test_align_train(toy, tmp_path, caplog):
    caplog.set_level(logging.INFO)
    model = tmp_path / "model.tsv"
    assert main(["align-train", str(toy), "-o", str(model), "--max-g", "2", "--max-p", "4"]) == 0
    assert model.read_text(encoding="utf-8").startswith("#params\t")
    ll = [float(m.group(1)) for m in re.finditer(r"log-likelihood (-?[0-9.]+)", caplog.text)]
    assert len(ll) >= 2
    assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))
    manifest = json.loads((tmp_path / "model.tsv.manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "align-train" and manifest["config"]["max_g"] == 2


def test_align_train_input_errors(tmp_path, caplog):
    empty = tmp_path / "empty.tsv"
    empty.write_text("", encoding="utf-8")
    assert main(["align-train", str(empty), "-o", str(tmp_path / "m")]) == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("化学\tka ga ku\nno tab here\n", encoding="utf-8")
    assert main(["align-train", str(bad), "-o", str(tmp_path / "m")]) == 2
    assert ":2:" in caplog.text


def test_dict_build(toy, tmp_path, capsys):
    model = tmp_path / "model.tsv"
    main(["align-train", str(toy), "-o", str(model), "--max-g", "2", "--max-p", "4"])
    capsys.readouterr()
    plain, multi = tmp_path / "d1.tsv", tmp_path / "d2.tsv"
    assert main(["dict-build", str(toy), "--model", str(model), "-o", str(plain)]) == 0
    stats = capsys.readouterr().out.strip().splitlines()[-1]
    d = G2pDictionary.load(plain)
    assert stats == d.stats_line()
    lines = plain.read_text(encoding="utf-8").splitlines()
    assert lines == sorted(lines)
    assert d.lookup("学") == frozenset({("ga", "ku")})
    assert d.lookup("化") == frozenset({("ka",), ("ba", "ke")})
    assert main(["dict-build", str(toy), "--model", str(model), "-o", str(multi), "--keep-multi-unit"]) == 0
    dm = G2pDictionary.load(multi)
    assert dm.lookup("化学") == frozenset({("ka", "ga", "ku"), ("ba", "ke", "ga", "ku")})
    assert dm.lookup("化") == d.lookup("化")


def test_dict_build_missing_model(toy, tmp_path):
    assert main(["dict-build", str(toy), "--model", str(tmp_path / "nope"), "-o", str(tmp_path / "d")]) == 2


def _simulate(files, eps="0.3", fmt="emit"):
    out = files / "sim"
    rc = main(["simulate", str(files / "labels.txt"), "--vocab", str(files / "vocab.txt"),
               "--graphemes", str(files / "graphemes.txt"), "--out-dir", str(out), "--eps", eps,
               "--pairs", "ka:ga,ba:ka,ke:ku", "--seed", "4", "--format", fmt])
    assert rc == 0
    return out / "manifest.tsv"


def test_simulate_manifest(files):
    man = _simulate(files)
    rows = man.read_text(encoding="utf-8").splitlines()
    assert rows[0] == "id\temission\tgrapheme\ttruth"
    assert rows[1].split("\t") == ["u1", "u1.emit", "化学", "ka [ ga ku"]
    first = (files / "sim" / "u1.emit").read_bytes()
    _simulate(files)
    assert (files / "sim" / "u1.emit").read_bytes() == first


def test_decode_constrained(files, capsys):
    man = _simulate(files)
    out = files / "hyp.txt"
    assert main(["decode", str(man), "--vocab", str(files / "vocab.txt"), "--dict", str(files / "dict.tsv"),
                 "-o", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert all("status=Matched" in ln for ln in printed) and len(printed) == 2
    status = (files / "hyp.txt.status.tsv").read_text(encoding="utf-8").splitlines()
    assert status[0] == "id\tstatus\tscore\tbacktracks" and status[1].split("\t")[1] == "Matched"
    hyps = [ln.split("\t")[1].split() for ln in out.read_text(encoding="utf-8").splitlines()]
    for h in hyps:
        ph = tuple(t for t in h if t not in "_[]#?")
        assert ph in {("ka", "ga", "ku"), ("ba", "ke", "ga", "ku")}


def test_decode_jobs_preserve_order(files):
    man = _simulate(files)
    one, many = files / "a.txt", files / "b.txt"
    base = ["decode", str(man), "--vocab", str(files / "vocab.txt"), "--dict", str(files / "dict.tsv")]
    assert main(base + ["-o", str(one)]) == 0
    assert main(base + ["-o", str(many), "--jobs", "2"]) == 0
    assert one.read_bytes() == many.read_bytes()


def test_decode_greedy_warns(files, caplog):
    _simulate(files, eps="0.0", fmt="tsv")
    em = files / "sim" / "u1.tsv"
    out = files / "g.txt"
    assert main(["decode", str(em), "--vocab", str(files / "vocab.txt"), "--mode", "greedy",
                 "--grapheme", "化学", "-o", str(out)]) == 0
    assert "ignores" in caplog.text
    assert out.read_text(encoding="utf-8") == "u1\tka [ ga ku\n"


def test_decode_no_cover(files, capsys):
    _simulate(files)
    out = files / "n.txt"
    rc = main(["decode", str(files / "sim" / "u1.emit"), "--vocab", str(files / "vocab.txt"),
               "--dict", str(files / "dict.tsv"), "--grapheme", "水", "-o", str(out)])
    assert rc == 0
    assert "status=NoCover" in capsys.readouterr().out


def test_decode_constrained_needs_dict(files):
    _simulate(files)
    rc = main(["decode", str(files / "sim" / "u1.emit"), "--vocab", str(files / "vocab.txt"),
               "--grapheme", "化学", "-o", str(files / "x")])
    assert rc == 2


def test_eval_identical(files, capsys):
    out = files / "rep.json"
    lab = str(files / "labels.txt")
    assert main(["eval", lab, lab, "--dict", str(files / "dict.tsv"),
                 "--graphemes", str(files / "graphemes.txt"), "-o", str(out)]) == 0
    rep = json.loads(out.read_text(encoding="utf-8"))
    assert rep["per"] == 0.0 and rep["prosody_f1"] == 1.0 and rep["g2p_match_rate"] == 1.0
    utt = (files / "rep.utt.tsv").read_text(encoding="utf-8").splitlines()
    assert utt[0] == "id\tper\tf1\tmatch" and utt[1] == "u1\t0.000000\t1.000000\t1"


def test_eval_candidates(files, tmp_path):
    cands = tmp_path / "cands.txt"
    cands.write_text("ka ga ku\tba ke ga ku\nka ga ku\n", encoding="utf-8")
    lab = str(files / "labels.txt")
    out = tmp_path / "rep.json"
    assert main(["eval", lab, lab, "--candidates", str(cands), "-o", str(out), "--jobs", "2"]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["g2p_match_rate"] == 0.5


def test_eval_mismatched_counts(files, tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("u1\tka ga ku\n", encoding="utf-8")
    assert main(["eval", str(files / "labels.txt"), str(short), "-o", str(tmp_path / "r.json")]) == 2


def test_synth_corpus(tmp_path, capsys):
    assert main(["synth-corpus", "--n", "5", "--seed", "1", "--out-dir", str(tmp_path / "c")]) == 0
    for name in ("vocab.txt", "dict.tsv", "labels.txt", "graphemes.txt", "pairs.tsv"):
        assert (tmp_path / "c" / name).is_file()
    assert len((tmp_path / "c" / "labels.txt").read_text(encoding="utf-8").splitlines()) == 5
