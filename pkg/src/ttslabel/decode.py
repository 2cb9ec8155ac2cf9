"""Greedy CTC decoding, plain and grapheme-constrained.

Constrained decoding works on blank-filtered frames. Walking left to right,
each frame's candidates are ranked by log-probability (lower id first on
ties) and the best *admissible* one is kept:

* a prosody token is admissible as is (it never touches the cursor);
* repeating the previous frame's token when the two frames were adjacent in
  the original timeline is a CTC collapse and leaves the cursor untouched;
* any other phoneme must keep the lattice cursor feasible.

Every choice must also leave few enough phonemes to finish: the shortest
completion after the choice may not exceed the number of frames still to come.
When a frame has no admissible candidate the search backtracks over the
``beam_width`` best candidates of earlier frames, at most ``max_backtracks``
times, before giving up and returning the unconstrained greedy output.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ttslabel.dictionary import G2pDictionary
from ttslabel.emission import EmissionMatrix, filter_nonblank_frames
from ttslabel.errors import LengthMismatch, NoCover, VocabMismatch
from ttslabel.labels import GraphemeSequence, Kind, MixedLabelSequence
from ttslabel.lattice import DEFAULT_MAX_KEY_LEN, GraphemeLattice, build_lattice


class Status(enum.Enum):
    MATCHED = "Matched"
    FALLBACK = "FallbackUnconstrained"
    NO_COVER = "NoCover"
    UNCHECKED = "Unchecked"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DecodeConfig:
    beam_width: int = 4
    max_backtracks: int = 256
    strict_greedy: bool = False
    max_key_len: int = DEFAULT_MAX_KEY_LEN

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be >= 0")


@dataclass(frozen=True)
class DecodeResult:
    sequence: MixedLabelSequence
    score: float
    status: Status
    frames_used: Tuple[int, ...]
    path: Tuple[int, ...] = field(default=(), repr=False)
    backtracks: int = 0

    def labels(self) -> str:
        return self.sequence.serialize()


def score_hypothesis(em: EmissionMatrix, path: Sequence[int]) -> float:
    """Sum of per-frame log-probabilities along ``path``."""
    if len(path) != em.num_frames:
        raise LengthMismatch(f"path has {len(path)} frames, emission has {em.num_frames}")
    if not len(path):
        return 0.0
    picked = em.logp[np.arange(em.num_frames), np.asarray(path, dtype=np.int64)]
    return float(math.fsum(picked.tolist()))


def collapse(path: Sequence[int], blank_id: int) -> List[int]:
    """Merge runs of identical ids, then drop blanks."""
    out = []
    prev = None
    for tid in path:
        if tid != prev and tid != blank_id:
            out.append(tid)
        prev = tid
    return out


def _sequence(em: EmissionMatrix, ids: Sequence[int]) -> MixedLabelSequence:
    return MixedLabelSequence(tuple(em.vocab.tokens[i] for i in ids))


def greedy_decode(em: EmissionMatrix) -> DecodeResult:
    path = em.argmax().tolist()
    blank = em.vocab.blank_id
    return DecodeResult(
        sequence=_sequence(em, collapse(path, blank)),
        score=score_hypothesis(em, path),
        status=Status.UNCHECKED,
        frames_used=tuple(t for t, k in enumerate(path) if k != blank),
        path=tuple(path),
    )


def _check_vocab(em: EmissionMatrix, lattice: GraphemeLattice) -> dict:
    vocab = em.vocab
    ids = {}
    for surface in lattice.tokens():
        tid = vocab.index.get(surface)
        if tid is None:
            raise VocabMismatch(f"dictionary phoneme {surface!r} is not in the emission vocabulary")
        if vocab.tokens[tid].kind is not Kind.PHONEME:
            raise VocabMismatch(f"dictionary token {surface!r} is not a phoneme in the vocabulary")
        ids[surface] = tid
    return ids


@dataclass
class _Frame:
    t: int
    cands: List[Tuple[int, frozenset, bool]]  # (token id, frontier after, collapsed)
    k: int
    prev_id: Optional[int]
    emitted_len: int


def constrained_decode(
    em: EmissionMatrix,
    lattice: GraphemeLattice,
    cfg: Optional[DecodeConfig] = None,
) -> DecodeResult:
    """Greedy search restricted to readings of the grapheme.

    Returns a ``Matched`` result whose phoneme subsequence is a full reading of
    the lattice's grapheme, or the plain greedy output flagged
    ``FallbackUnconstrained`` when the search is exhausted.

    Raises:
        VocabMismatch: the lattice uses phonemes the emission vocabulary lacks.
    """
    cfg = cfg or DecodeConfig()
    tok_ids = _check_vocab(em, lattice)
    sub, orig = filter_nonblank_frames(em)
    orig = orig.tolist()
    n = len(orig)
    vocab = em.vocab
    prosody_ids = vocab.ids_of_kind(Kind.PROSODY)
    max_backtracks = 0 if cfg.strict_greedy else cfg.max_backtracks
    width = 1 if cfg.strict_greedy else cfg.beam_width
    logp = sub.logp

    def candidates(t: int, frontier: frozenset, prev_id: Optional[int]):
        budget = n - t - 1
        row = logp[t]
        here = lattice.min_to_accept(frontier)
        collapse_id = prev_id if prev_id is not None and orig[t] == orig[t - 1] + 1 else None
        out = []
        if here <= budget:
            if collapse_id is not None:
                out.append((collapse_id, frontier, True))
            for pid in prosody_ids:
                if pid != collapse_id:
                    out.append((pid, frontier, False))
        for surface in lattice.allowed(frontier):
            tid = tok_ids[surface]
            if tid == collapse_id:
                continue
            nxt = lattice.step(frontier, surface)
            if lattice.min_to_accept(nxt) <= budget:
                out.append((tid, nxt, False))
        out.sort(key=lambda c: (-float(row[c[0]]), c[0]))
        return out[:width]

    stack: List[_Frame] = []
    emitted: List[int] = []
    chosen: List[int] = []
    frontier = frozenset((lattice.start,))
    prev_id: Optional[int] = None
    t = 0
    backtracks = 0
    success = False
    while True:
        if t == n:
            if lattice.accept in frontier:
                success = True
                break
            dead = True
        else:
            cands = candidates(t, frontier, prev_id)
            dead = not cands
            if cands:
                stack.append(_Frame(t, cands, 0, prev_id, len(emitted)))
        if dead:
            while stack and stack[-1].k + 1 >= len(stack[-1].cands):
                stack.pop()
            if not stack or backtracks >= max_backtracks:
                break
            backtracks += 1
            stack[-1].k += 1
        top = stack[-1]
        tid, frontier, collapsed = top.cands[top.k]
        del emitted[top.emitted_len :]
        del chosen[top.t :]
        if not collapsed:
            emitted.append(tid)
        chosen.append(tid)
        prev_id = tid
        t = top.t + 1

    if not success:
        greedy = greedy_decode(em)
        return DecodeResult(
            greedy.sequence, greedy.score, Status.FALLBACK, greedy.frames_used, greedy.path, backtracks
        )

    path = [vocab.blank_id] * em.num_frames
    for t_sub, tid in zip(orig, chosen):
        path[t_sub] = tid
    return DecodeResult(
        sequence=_sequence(em, emitted),
        score=score_hypothesis(em, path),
        status=Status.MATCHED,
        frames_used=tuple(orig),
        path=tuple(path),
        backtracks=backtracks,
    )


def decode_utterance(
    em: EmissionMatrix,
    grapheme: Union[GraphemeSequence, str],
    dictionary: G2pDictionary,
    cfg: Optional[DecodeConfig] = None,
) -> DecodeResult:
    """Build the lattice and decode; an uncoverable grapheme yields greedy output with ``NoCover``."""
    cfg = cfg or DecodeConfig()
    try:
        lattice = build_lattice(grapheme, dictionary, cfg.max_key_len)
    except NoCover:
        greedy = greedy_decode(em)
        return DecodeResult(greedy.sequence, greedy.score, Status.NO_COVER, greedy.frames_used, greedy.path)
    return constrained_decode(em, lattice, cfg)
