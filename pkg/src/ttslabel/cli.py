"""Command-line entry point.

Exit codes: 0 success, 1 internal error, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ttslabel import __version__
from ttslabel import emission as emission_io
from ttslabel.align import (
    DEFAULT_LENGTH_PENALTY,
    DEFAULT_MAX_G,
    DEFAULT_MAX_ITERS,
    DEFAULT_MAX_P,
    DEFAULT_TOL,
    AlignmentModel,
    align_corpus,
    em_train,
    read_pairs,
)
from ttslabel.decode import DecodeConfig, DecodeResult, decode_utterance, greedy_decode
from ttslabel.dictionary import G2pDictionary, build_dictionary
from ttslabel.errors import TtsLabelError
from ttslabel.labels import GraphemeSequence, Vocabulary, parse_mixed, read_label_file
from ttslabel.lattice import DEFAULT_MAX_KEY_LEN
from ttslabel.metrics import aggregate, g2p_match, g2p_match_via_dictionary, score_utterance
from ttslabel.simulate import SimConfig, synthesize, synthetic_corpus

log = logging.getLogger("ttslabel")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2

FORMATS = """\
file formats (all UTF-8):
  pairs       grapheme<TAB>phoneme tokens (space-separated), one pair per line
  model       g_chunk<TAB>p_chunk<TAB>prob; first line '#params<TAB>max_g=..<TAB>..'
  dictionary  key<TAB>expansion tokens, one (key, expansion) per line, sorted
  vocabulary  optional header '#blank <surface>', then one surface per line (line = id)
  labels      [id<TAB>]whitespace-separated token surfaces, one utterance per line
  graphemes   [id<TAB>]grapheme text, one utterance per line (one unit per character)
  candidates  TAB-separated reading candidates per line, aligned with the ref file
  emissions   b'EMIT1' u32 N u32 V then N*V float32 LE log-probs, or a TSV with a
              header row of token surfaces; a decode manifest is a TSV with header
              'id<TAB>emission[<TAB>grapheme[<TAB>truth]]'
"""


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: Dict[str, object]
    inputs: List[str]
    outputs: List[str]
    version: str = __version__
    seeds: Dict[str, int] = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, ensure_ascii=False, sort_keys=True) + "\n",
                        encoding="utf-8")


def _manifest(args, inputs, outputs, seeds=None) -> None:
    config = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in sorted(vars(args).items()) if k != "func"}
    m = RunManifest(args.command, config, [str(p) for p in inputs], [str(p) for p in outputs], seeds=seeds or {})
    m.write(Path(str(outputs[0]) + ".manifest.json"))


def _require(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise InputError(f"{what} is required")
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def cmd_align_train(args) -> int:
    pairs = read_pairs(_require(args.pairs, "pairs file"))
    if not pairs:
        raise InputError(f"{args.pairs}: no pairs")
    model = em_train(pairs, max_g=args.max_g, max_p=args.max_p, max_iters=args.max_iters,
                     tol=args.tol, length_penalty=args.length_penalty)
    model.save(args.output)
    log.info("trained on %d pairs (%d skipped), %d chunk pairs, final log-likelihood %.6f",
             len(pairs) - len(model.skipped), len(model.skipped), len(model.chunk_prob),
             model.log_likelihoods[-1])
    _manifest(args, [args.pairs], [args.output])
    return EXIT_OK


def cmd_dict_build(args) -> int:
    pairs = read_pairs(_require(args.pairs, "pairs file"))
    model = AlignmentModel.load(_require(args.model, "alignment model"))
    aligned, bad = align_corpus(model, pairs)
    for n in bad:
        log.warning("pair %d (%s) has no alignment under the model; skipped", n + 1, pairs[n][0])
    d = build_dictionary(aligned, keep_multi_unit=args.keep_multi_unit)
    d.save(args.output)
    print(d.stats_line())
    _manifest(args, [args.pairs, args.model], [args.output])
    return EXIT_OK


def _read_manifest(path: Path) -> Optional[List[Tuple[str, Path, Optional[str]]]]:
    head = path.read_bytes()[:16]
    if not head.startswith(b"id\temission"):
        return None
    rows = []
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = dict(zip(header, line.split("\t")))
        if "emission" not in cols or not cols.get("id"):
            raise InputError(f"{path}:{n}: malformed manifest row")
        em_path = Path(cols["emission"])
        if not em_path.is_absolute():
            em_path = path.parent / em_path
        rows.append((cols["id"], em_path, cols.get("grapheme")))
    return rows


_WORKER: dict = {}


def _init_worker(vocab: Vocabulary, dictionary: Optional[G2pDictionary], mode: str, cfg: DecodeConfig):
    _WORKER.update(vocab=vocab, dictionary=dictionary, mode=mode, cfg=cfg)


def _decode_one(job: Tuple[str, str, Optional[str]]) -> Tuple[str, DecodeResult]:
    uid, em_path, grapheme = job
    em = emission_io.load(em_path, _WORKER["vocab"])
    if _WORKER["mode"] == "greedy":
        return uid, greedy_decode(em)
    g = GraphemeSequence.from_text(grapheme or "")
    return uid, decode_utterance(em, g, _WORKER["dictionary"], _WORKER["cfg"])


def cmd_decode(args) -> int:
    vocab = Vocabulary.load(_require(args.vocab, "vocabulary"))
    src = _require(args.emissions, "emission file")
    rows = _read_manifest(src)
    if rows is None:
        rows = [(src.stem, src, args.grapheme)]
    elif args.grapheme is not None:
        log.warning("--grapheme ignored: graphemes come from the manifest")
    dictionary = None
    if args.mode == "greedy":
        if args.grapheme is not None or args.dict is not None:
            log.warning("greedy mode ignores --grapheme/--dict")
    else:
        dictionary = G2pDictionary.load(_require(args.dict, "--dict"))
        missing = [uid for uid, _, g in rows if g is None]
        if missing:
            raise InputError(f"constrained mode needs a grapheme for every utterance (missing: {missing[0]})")
    cfg = DecodeConfig(beam_width=args.beam_width, max_backtracks=args.max_backtracks,
                       strict_greedy=args.strict_greedy, max_key_len=args.max_key_len)
    jobs = [(uid, str(p), g) for uid, p, g in rows]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_init_worker,
                                 initargs=(vocab, dictionary, args.mode, cfg)) as pool:
            results = list(pool.map(_decode_one, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        _init_worker(vocab, dictionary, args.mode, cfg)
        results = [_decode_one(j) for j in jobs]

    out = Path(args.output)
    label_lines, status_lines = [], ["id\tstatus\tscore\tbacktracks"]
    for uid, res in results:
        label_lines.append(f"{uid}\t{res.labels()}")
        status_lines.append(f"{uid}\t{res.status}\t{res.score!r}\t{res.backtracks}")
        print(f"{uid}\tstatus={res.status}\t{res.labels()}")
    out.write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    status_path = Path(str(out) + ".status.tsv")
    status_path.write_text("\n".join(status_lines) + "\n", encoding="utf-8")
    inputs = [src, args.vocab] + ([args.dict] if dictionary is not None else [])
    _manifest(args, inputs, [out, status_path])
    return EXIT_OK


def _read_candidates(path: Path) -> List[List[Tuple[str, ...]]]:
    return [[tuple(c.split()) for c in line.split("\t") if c.split()]
            for line in path.read_text(encoding="utf-8").splitlines()]


def _score_one(job):
    uid, ref, hyp, match = job
    return score_utterance(uid, parse_mixed(ref), parse_mixed(hyp), match)


def cmd_eval(args) -> int:
    refs = read_label_file(_require(args.ref, "reference labels"))
    hyps = read_label_file(_require(args.hyp, "hypothesis labels"))
    if len(refs) != len(hyps):
        raise InputError(f"{len(refs)} reference utterances but {len(hyps)} hypotheses")
    matches: List[Optional[bool]] = [None] * len(refs)
    inputs = [args.ref, args.hyp]
    if args.candidates is not None and args.dict is not None:
        raise InputError("use either --candidates or --dict/--graphemes, not both")
    if args.candidates is not None:
        cands = _read_candidates(_require(args.candidates, "candidates file"))
        if len(cands) != len(refs):
            raise InputError(f"{len(cands)} candidate lines for {len(refs)} utterances")
        matches = [g2p_match(c, parse_mixed(h)) for c, (_, h) in zip(cands, hyps)]
        inputs.append(args.candidates)
    elif args.dict is not None or args.graphemes is not None:
        d = G2pDictionary.load(_require(args.dict, "--dict"))
        graphemes = read_label_file(_require(args.graphemes, "--graphemes"))
        if len(graphemes) != len(refs):
            raise InputError(f"{len(graphemes)} grapheme lines for {len(refs)} utterances")
        matches = [g2p_match_via_dictionary(GraphemeSequence.from_text(g), d, parse_mixed(h), args.max_key_len)
                   for (_, g), (_, h) in zip(graphemes, hyps)]
        inputs += [args.dict, args.graphemes]

    jobs = [(uid, r, h, m) for (uid, r), (_, h), m in zip(refs, hyps, matches)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            scores = list(pool.map(_score_one, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        scores = [_score_one(j) for j in jobs]
    report = aggregate(scores)
    out = Path(args.output)
    out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    per_utt = Path(args.per_utt) if args.per_utt else out.with_suffix(".utt.tsv")
    lines = ["id\tper\tf1\tmatch"]
    for s in scores:
        per = "nan" if s.per is None else f"{s.per:.6f}"
        match = "" if s.match is None else str(int(s.match))
        lines.append(f"{s.uid}\t{per}\t{s.f1:.6f}\t{match}")
    per_utt.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rate = "n/a" if report.g2p_match_rate is None else f"{report.g2p_match_rate:.4f}"
    print(f"per={report.per:.6f} prosody_f1={report.prosody_f1:.6f} g2p_match={rate}")
    _manifest(args, inputs, [out, per_utt])
    return EXIT_OK


def _parse_pairs(arg: Optional[str]) -> Tuple[Tuple[str, str], ...]:
    if not arg:
        return ()
    path = Path(arg)
    if path.is_file():
        items = [ln.split() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    else:
        items = [p.split(":") for p in arg.split(",") if p]
    pairs = []
    for it in items:
        if len(it) != 2:
            raise InputError(f"bad confusion pair {it!r}; expected 'a:b' or 'a b' per line")
        pairs.append((it[0], it[1]))
    return tuple(pairs)


def cmd_simulate(args) -> int:
    vocab = Vocabulary.load(_require(args.vocab, "vocabulary"))
    labels = read_label_file(_require(args.labels, "label file"))
    graphemes = read_label_file(_require(args.graphemes, "--graphemes")) if args.graphemes else None
    if graphemes is not None and len(graphemes) != len(labels):
        raise InputError(f"{len(graphemes)} grapheme lines for {len(labels)} utterances")
    pairs = _parse_pairs(args.pairs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = "id\temission\tgrapheme\ttruth" if graphemes is not None else "id\temission\ttruth"
    rows = [header]
    seeds = {}
    for k, (uid, text) in enumerate(labels):
        seed = args.seed + k
        seeds[uid] = seed
        cfg = SimConfig(frames_per_token=tuple(args.frames), blank_insert_prob=args.blank_prob,
                        confusion_eps=args.eps, confusion_pairs=pairs, rng_seed=seed,
                        confuse_prosody=args.confuse_prosody)
        em = synthesize(parse_mixed(text, vocab), vocab, cfg)
        name = f"{uid}.{'tsv' if args.format == 'tsv' else 'emit'}"
        if args.format == "tsv":
            (out_dir / name).write_text(emission_io.write_tsv(em), encoding="utf-8")
        else:
            em.save(out_dir / name)
        cols = [uid, name] + ([graphemes[k][1]] if graphemes is not None else []) + [" ".join(text.split())]
        rows.append("\t".join(cols))
    manifest = out_dir / "manifest.tsv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    log.info("wrote %d emission files to %s", len(labels), out_dir)
    _manifest(args, [args.labels, args.vocab], [manifest], seeds={"base": args.seed, **seeds})
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    corpus = synthetic_corpus(args.n, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus.vocab.save(out / "vocab.txt")
    corpus.dictionary.save(out / "dict.tsv")
    (out / "labels.txt").write_text(
        "".join(f"{u.uid}\t{u.truth.serialize()}\n" for u in corpus.utterances), encoding="utf-8")
    (out / "graphemes.txt").write_text(
        "".join(f"{u.uid}\t{u.grapheme.text()}\n" for u in corpus.utterances), encoding="utf-8")
    (out / "pairs.tsv").write_text(
        "".join(f"{u.grapheme.text()}\t{' '.join(u.truth.phonemes())}\n" for u in corpus.utterances),
        encoding="utf-8")
    print(f"wrote {len(corpus.utterances)} utterances to {out}")
    _manifest(args, [], [out / "labels.txt"], seeds={"corpus": args.seed})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(prog="ttslabel", description=__doc__, epilog=FORMATS, formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("align-train", help="fit the many-to-many g2p aligner with EM", epilog=FORMATS,
                       formatter_class=fmt)
    a.add_argument("pairs", type=Path)
    a.add_argument("-o", "--output", type=Path, required=True, help="model TSV to write")
    a.add_argument("--max-g", type=int, default=DEFAULT_MAX_G)
    a.add_argument("--max-p", type=int, default=DEFAULT_MAX_P)
    a.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    a.add_argument("--tol", type=float, default=DEFAULT_TOL)
    a.add_argument("--length-penalty", type=float, default=DEFAULT_LENGTH_PENALTY,
                   help="exponent on chunk size applied to chunk probabilities (0 disables)")
    a.set_defaults(func=cmd_align_train)

    d = sub.add_parser("dict-build", help="align pairs and build the g2p dictionary", epilog=FORMATS,
                       formatter_class=fmt)
    d.add_argument("pairs", type=Path)
    d.add_argument("--model", type=Path, required=True)
    d.add_argument("-o", "--output", type=Path, required=True)
    d.add_argument("--keep-multi-unit", action="store_true",
                   help="also keep each whole grapheme/phoneme pair as an entry")
    d.set_defaults(func=cmd_dict_build)

    c = sub.add_parser("decode", help="greedy or grapheme-constrained decoding", epilog=FORMATS,
                       formatter_class=fmt)
    c.add_argument("emissions", type=Path, help="emission file or decode manifest TSV")
    c.add_argument("--vocab", type=Path, required=True)
    c.add_argument("--grapheme", help="grapheme text for a single emission file")
    c.add_argument("--dict", type=Path)
    c.add_argument("--mode", choices=("greedy", "constrained"), default="constrained")
    c.add_argument("--strict-greedy", action="store_true", help="disable backtracking")
    c.add_argument("--beam-width", type=int, default=4)
    c.add_argument("--max-backtracks", type=int, default=256)
    c.add_argument("--max-key-len", type=int, default=DEFAULT_MAX_KEY_LEN)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("-o", "--output", type=Path, required=True,
                   help="label file to write; status goes to OUTPUT.status.tsv")
    c.set_defaults(func=cmd_decode)

    e = sub.add_parser("eval", help="PER, prosody F1 and G2P match", epilog=FORMATS, formatter_class=fmt)
    e.add_argument("ref", type=Path)
    e.add_argument("hyp", type=Path)
    e.add_argument("--candidates", type=Path)
    e.add_argument("--dict", type=Path)
    e.add_argument("--graphemes", type=Path)
    e.add_argument("--max-key-len", type=int, default=DEFAULT_MAX_KEY_LEN)
    e.add_argument("--per-utt", type=Path, help="per-utterance TSV (default: OUTPUT with .utt.tsv)")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("-o", "--output", type=Path, required=True, help="JSON report")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="synthesize emissions from label files", epilog=FORMATS,
                       formatter_class=fmt)
    s.add_argument("labels", type=Path)
    s.add_argument("--vocab", type=Path, required=True)
    s.add_argument("--graphemes", type=Path, help="copied into the manifest for constrained decoding")
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--eps", type=float, default=0.0, help="confusion mass per phoneme")
    s.add_argument("--pairs", help="confusion pairs: file with 'a b' lines, or 'a:b,c:d'")
    s.add_argument("--blank-prob", type=float, default=0.3)
    s.add_argument("--frames", type=int, nargs=2, default=(1, 3), metavar=("LO", "HI"))
    s.add_argument("--confuse-prosody", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=("emit", "tsv"), default="emit")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("synth-corpus", help="write a random lexicon, dictionary and label corpus")
    t.add_argument("--n", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out-dir", type=Path, required=True)
    t.set_defaults(func=cmd_synth_corpus)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, TtsLabelError, ValueError, OSError, UnicodeDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
