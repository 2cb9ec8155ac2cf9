"""Synthetic CTC emissions from ground-truth label sequences.

Each truth token occupies a few identical frames. A phoneme row puts
``1 - eps`` of its mass on the truth and ``eps`` on its confusion partners
(uniformly). A token without partners spreads ``eps`` over the other
phonemes, or over every other token when ``confuse_prosody`` is set, which
also lets prosody rows be confused. With ``perturb`` on, the log row of each
token occurrence is shifted by one shared draw of Gumbel noise and
renormalized, so the top token is the truth with probability
``1 - eps`` and a partner otherwise (Gumbel-max). Without the perturbation a
row with ``eps < 0.5`` never changes the greedy output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ttslabel.dictionary import G2pDictionary
from ttslabel.emission import EmissionMatrix
from ttslabel.errors import UnknownToken
from ttslabel.labels import (
    PROSODY_SURFACES,
    GraphemeSequence,
    Kind,
    MixedLabelSequence,
    Token,
    Vocabulary,
)


@dataclass(frozen=True)
class SimConfig:
    frames_per_token: Tuple[int, int] = (1, 3)
    blank_insert_prob: float = 0.3
    confusion_eps: float = 0.0
    confusion_pairs: Tuple[Tuple[str, str], ...] = ()
    rng_seed: int = 0
    confuse_prosody: bool = False
    perturb: bool = True
    floor: float = 1e-6

    def __post_init__(self):
        lo, hi = self.frames_per_token
        if not 1 <= lo <= hi:
            raise ValueError("frames_per_token must satisfy 1 <= lo <= hi")
        for name in ("blank_insert_prob", "confusion_eps"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("floor must lie in [0, 1)")


def partner_map(vocab: Vocabulary, pairs: Sequence[Tuple[str, str]]) -> Dict[int, List[int]]:
    """Symmetric confusion partners by token id."""
    out: Dict[int, set] = {}
    for a, b in pairs:
        ia, ib = vocab.id_of(a), vocab.id_of(b)
        if ia == vocab.blank_id or ib == vocab.blank_id:
            raise ValueError("blank cannot take part in a confusion pair")
        if ia == ib:
            continue
        out.setdefault(ia, set()).add(ib)
        out.setdefault(ib, set()).add(ia)
    return {k: sorted(v) for k, v in out.items()}


def _row(truth: int, vocab: Vocabulary, eps: float, partners: Dict[int, List[int]],
         rng: np.random.Generator, perturb: bool, floor: float, cross_kind: bool = False) -> np.ndarray:
    V = len(vocab)
    mass = np.zeros(V)
    mass[truth] = 1.0 - eps
    if eps > 0.0:
        others = partners.get(truth)
        if not others:
            kind = vocab.tokens[truth].kind
            others = [i for i in range(V) if i != truth and i != vocab.blank_id
                      and (cross_kind or vocab.tokens[i].kind is kind)]
        if others:
            mass[others] += eps / len(others)
        else:
            mass[truth] = 1.0
    if perturb and 0.0 < eps < 1.0:
        live = mass > 0.0
        logits = np.full(V, -np.inf)
        logits[live] = np.log(mass[live]) + rng.gumbel(size=int(live.sum()))
        logits -= logits.max()
        mass = np.exp(logits)
        mass /= mass.sum()
    return (1.0 - floor) * mass + floor / V


def synthesize(truth: MixedLabelSequence, vocab: Vocabulary, cfg: SimConfig) -> EmissionMatrix:
    """Render ``truth`` as a normalized emission matrix; deterministic in ``cfg.rng_seed``.

    Raises:
        UnknownToken: a truth token is missing from ``vocab``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    ids = []
    for tok in truth:
        if tok.surface not in vocab.index:
            raise UnknownToken(tok.surface)
        ids.append(vocab.index[tok.surface])
    partners = partner_map(vocab, cfg.confusion_pairs)
    blank_row = np.full(len(vocab), cfg.floor / len(vocab))
    blank_row[vocab.blank_id] += 1.0 - cfg.floor

    rows = []
    lo, hi = cfg.frames_per_token
    prev = None
    for tid in ids:
        if prev is not None and (prev == tid or rng.random() < cfg.blank_insert_prob):
            rows.append(blank_row)
        confusable = vocab.tokens[tid].kind is Kind.PHONEME or cfg.confuse_prosody
        eps = cfg.confusion_eps if confusable else 0.0
        row = _row(tid, vocab, eps, partners, rng, cfg.perturb, cfg.floor, cfg.confuse_prosody)
        rows.extend([row] * int(rng.integers(lo, hi + 1)))
        prev = tid
    probs = np.array(rows) if rows else np.zeros((0, len(vocab)))
    return EmissionMatrix(np.log(probs) if rows else probs, vocab)


# Mora inventory and voicing confusions used by the synthetic corpus.
CONSONANT_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("ka", "ga"), ("ki", "gi"), ("ku", "gu"), ("ke", "ge"), ("ko", "go"),
    ("sa", "za"), ("shi", "ji"), ("su", "zu"), ("se", "ze"), ("so", "zo"),
    ("ta", "da"), ("te", "de"), ("to", "do"),
    ("ha", "ba"), ("hi", "bi"), ("fu", "bu"), ("he", "be"), ("ho", "bo"),
    ("ma", "na"), ("mi", "ni"), ("mo", "no"),
)
PLAIN_MORAE: Tuple[str, ...] = ("a", "i", "u", "e", "o", "n", "ra", "ri", "ru", "re", "ro", "ya", "yu", "yo", "wa")


def mora_inventory() -> List[str]:
    out = [m for pair in CONSONANT_PAIRS for m in pair]
    return out + [m for m in PLAIN_MORAE if m not in out]


@dataclass
class SyntheticUtterance:
    uid: str
    grapheme: GraphemeSequence
    truth: MixedLabelSequence


@dataclass
class SyntheticCorpus:
    vocab: Vocabulary
    dictionary: G2pDictionary
    utterances: List[SyntheticUtterance] = field(default_factory=list)


def synthetic_corpus(
    n: int,
    seed: int = 0,
    num_graphemes: int = 60,
    graphemes_per_utt: Tuple[int, int] = (2, 6),
    readings_per_key: Tuple[int, int] = (1, 2),
    morae_per_reading: Tuple[int, int] = (1, 3),
    prosody_rate: float = 0.3,
) -> SyntheticCorpus:
    """Random lexicon of single-character keys and utterances drawn from it.

    Truth phonemes are always a reading of the utterance's graphemes under the
    returned dictionary. Prosody tokens are inserted between morae at
    ``prosody_rate`` per gap.
    """
    rng = np.random.default_rng(seed)
    morae = mora_inventory()
    chars = [chr(0x4E00 + i) for i in range(num_graphemes)]
    lexicon: Dict[str, set] = {}
    for ch in chars:
        readings = set()
        for _ in range(int(rng.integers(readings_per_key[0], readings_per_key[1] + 1))):
            k = int(rng.integers(morae_per_reading[0], morae_per_reading[1] + 1))
            readings.add(tuple(morae[int(i)] for i in rng.integers(0, len(morae), size=k)))
        lexicon[ch] = readings
    dictionary = G2pDictionary(lexicon)
    vocab = Vocabulary(morae + list(PROSODY_SURFACES))

    utts = []
    for u in range(n):
        L = int(rng.integers(graphemes_per_utt[0], graphemes_per_utt[1] + 1))
        units = [chars[int(i)] for i in rng.integers(0, len(chars), size=L)]
        phon: List[str] = []
        for ch in units:
            options = sorted(lexicon[ch])
            phon.extend(options[int(rng.integers(0, len(options)))])
        toks: List[Token] = []
        for k, m in enumerate(phon):
            if k and rng.random() < prosody_rate:
                toks.append(Token.prosody(PROSODY_SURFACES[int(rng.integers(0, len(PROSODY_SURFACES)))]))
            toks.append(Token.phoneme(m))
        if rng.random() < prosody_rate:
            toks.append(Token.prosody("_"))
        utts.append(SyntheticUtterance(f"utt{u:05d}", GraphemeSequence(tuple(units)), MixedLabelSequence(tuple(toks))))
    return SyntheticCorpus(vocab, dictionary, utts)


def random_labels(rng: np.random.Generator, phonemes: Sequence[str], max_len: int = 12,
                  prosody_rate: float = 0.3) -> MixedLabelSequence:
    """Random mixed sequence; consecutive repeats are allowed."""
    toks = []
    for _ in range(int(rng.integers(0, max_len + 1))):
        if rng.random() < prosody_rate:
            toks.append(Token.prosody(PROSODY_SURFACES[int(rng.integers(0, len(PROSODY_SURFACES)))]))
        else:
            toks.append(Token.phoneme(phonemes[int(rng.integers(0, len(phonemes)))]))
    return MixedLabelSequence(tuple(toks))
