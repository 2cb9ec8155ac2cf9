"""PER, prosody F1 and G2P match rate.

Corpus figures are micro-averaged: edit and TP/FP/FN counts are pooled over
utterances before dividing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence, Tuple

from ttslabel.dictionary import G2pDictionary
from ttslabel.errors import EmptyReference, NoCover
from ttslabel.labels import GraphemeSequence, Kind, MixedLabelSequence
from ttslabel.lattice import DEFAULT_MAX_KEY_LEN, build_lattice, matches


def edit_counts(ref: Sequence, hyp: Sequence) -> Tuple[int, int, int, int]:
    """Unit-cost Levenshtein alignment of ``hyp`` against ``ref``.

    Returns ``(distance, substitutions, insertions, deletions)``. Among
    minimum-distance alignments the one with the fewest substitutions is
    reported, so the split into S/I/D is deterministic.
    """
    R, H = len(ref), len(hyp)
    # cells hold (distance, substitutions, insertions, deletions)
    prev = [(j, 0, j, 0) for j in range(H + 1)]
    for i in range(1, R + 1):
        cur = [(i, 0, 0, i)]
        r = ref[i - 1]
        for j in range(1, H + 1):
            d, s, ins, dl = prev[j - 1]
            if r == hyp[j - 1]:
                best = (d, s, ins, dl)
            else:
                best = (d + 1, s + 1, ins, dl)
            d, s, ins, dl = cur[j - 1]
            best = min(best, (d + 1, s, ins + 1, dl))
            d, s, ins, dl = prev[j]
            best = min(best, (d + 1, s, ins, dl + 1))
            cur.append(best)
        prev = cur
    return prev[H]


def phoneme_error_rate(ref: MixedLabelSequence, hyp: MixedLabelSequence) -> Tuple[float, int, int, int]:
    """Returns ``(per, S, I, D)`` on the phoneme subsequences.

    Raises:
        EmptyReference: the reference has no phonemes.
    """
    r, h = ref.phonemes(), hyp.phonemes()
    if not r:
        raise EmptyReference("reference has no phoneme tokens")
    dist, s, i, d = edit_counts(r, h)
    return dist / len(r), s, i, d


def prosody_counts(ref: MixedLabelSequence, hyp: MixedLabelSequence) -> Tuple[int, int, int]:
    """(TP, FP, FN) of prosody tokens after a full mixed-sequence edit alignment.

    The alignment minimizes edit distance and, among those, maximizes the
    number of matched pairs. A hyp prosody token is a true positive when it is
    aligned to an identical ref token.
    """
    R, H = len(ref), len(hyp)
    a, b = ref.tokens, hyp.tokens
    # cell: (distance, -matches, -prosody matches); minimized lexicographically
    INFK = (R + H + 1, 0, 0)
    cost = [[INFK] * (H + 1) for _ in range(R + 1)]
    move = [[0] * (H + 1) for _ in range(R + 1)]  # 0 diag, 1 deletion (ref only), 2 insertion
    cost[0][0] = (0, 0, 0)
    for i in range(R + 1):
        for j in range(H + 1):
            if i == 0 and j == 0:
                continue
            best, mv = INFK, 0
            if i and j:
                d, m, pm = cost[i - 1][j - 1]
                if a[i - 1] == b[j - 1]:
                    cand = (d, m - 1, pm - (1 if a[i - 1].kind is Kind.PROSODY else 0))
                else:
                    cand = (d + 1, m, pm)
                best, mv = cand, 0
            if i:
                d, m, pm = cost[i - 1][j]
                cand = (d + 1, m, pm)
                if cand < best:
                    best, mv = cand, 1
            if j:
                d, m, pm = cost[i][j - 1]
                cand = (d + 1, m, pm)
                if cand < best:
                    best, mv = cand, 2
            cost[i][j], move[i][j] = best, mv
    tp = 0
    i, j = R, H
    while i or j:
        mv = move[i][j]
        if mv == 0:
            if a[i - 1] == b[j - 1] and a[i - 1].kind is Kind.PROSODY:
                tp += 1
            i, j = i - 1, j - 1
        elif mv == 1:
            i -= 1
        else:
            j -= 1
    n_ref = sum(1 for t in a if t.kind is Kind.PROSODY)
    n_hyp = sum(1 for t in b if t.kind is Kind.PROSODY)
    return tp, n_hyp - tp, n_ref - tp


def prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def prosody_f1(ref: MixedLabelSequence, hyp: MixedLabelSequence) -> Tuple[float, float, float]:
    """Returns ``(precision, recall, f1)``; an undefined ratio counts as 0."""
    return prf(*prosody_counts(ref, hyp))


def g2p_match(candidates: Iterable[Sequence[str]], hyp: MixedLabelSequence) -> bool:
    phon = hyp.phonemes()
    return any(tuple(c) == phon for c in candidates)


def g2p_match_via_dictionary(
    g: GraphemeSequence,
    dictionary: G2pDictionary,
    hyp: MixedLabelSequence,
    max_key_len: int = DEFAULT_MAX_KEY_LEN,
) -> bool:
    """Whether the hyp phonemes are a full reading of ``g`` under the dictionary."""
    try:
        lattice = build_lattice(g, dictionary, max_key_len)
    except NoCover:
        return False
    return matches(lattice, hyp.phonemes())


@dataclass
class EvalReport:
    per: float = 0.0
    prosody_precision: float = 0.0
    prosody_recall: float = 0.0
    prosody_f1: float = 0.0
    g2p_match_rate: Optional[float] = None  # None when no match information was given
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_phonemes: int = 0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: int = 0
    total: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class UtteranceScore:
    uid: str
    per: Optional[float]
    f1: float
    match: Optional[bool]
    counts: Tuple[int, int, int, int, int, int, int]  # S, I, D, ref_len, TP, FP, FN


def score_utterance(
    uid: str,
    ref: MixedLabelSequence,
    hyp: MixedLabelSequence,
    match: Optional[bool] = None,
) -> UtteranceScore:
    r = ref.phonemes()
    _, s, i, d = edit_counts(r, hyp.phonemes())
    tp, fp, fn = prosody_counts(ref, hyp)
    per = (s + i + d) / len(r) if r else None
    return UtteranceScore(uid, per, prf(tp, fp, fn)[2], match, (s, i, d, len(r), tp, fp, fn))


def aggregate(scores: Iterable[UtteranceScore]) -> EvalReport:
    rep = EvalReport()
    for u in scores:
        s, i, d, n, tp, fp, fn = u.counts
        rep.substitutions += s
        rep.insertions += i
        rep.deletions += d
        rep.ref_phonemes += n
        rep.tp += tp
        rep.fp += fp
        rep.fn += fn
        if u.match is not None:
            rep.total += 1
            rep.matched += int(u.match)
    edits = rep.substitutions + rep.insertions + rep.deletions
    rep.per = edits / rep.ref_phonemes if rep.ref_phonemes else (0.0 if not edits else float("inf"))
    rep.prosody_precision, rep.prosody_recall, rep.prosody_f1 = prf(rep.tp, rep.fp, rep.fn)
    rep.g2p_match_rate = rep.matched / rep.total if rep.total else None
    return rep


def evaluate(
    refs: Sequence[MixedLabelSequence],
    hyps: Sequence[MixedLabelSequence],
    matches_: Optional[Sequence[bool]] = None,
) -> EvalReport:
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references but {len(hyps)} hypotheses")
    flags = list(matches_) if matches_ is not None else [None] * len(refs)
    return aggregate(score_utterance(str(k), r, h, m) for k, (r, h, m) in enumerate(zip(refs, hyps, flags)))
