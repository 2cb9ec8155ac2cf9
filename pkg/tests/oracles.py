"""Brute-force references used by the tests.

Nothing in here touches the lattice or the decoder: readings are enumerated
as explicit sets of token tuples and the decoding policy is replayed by plain
recursion over those sets.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

Word = Tuple[str, ...]


def language(units: Sequence[str], entries: Dict[str, Iterable[Sequence[str]]], max_key_len: int = 4) -> Set[Word]:
    """Every concatenation of expansions over every segmentation of ``units``."""
    units = tuple(units)
    entries = {k: [tuple(e) for e in v] for k, v in entries.items()}

    @lru_cache(maxsize=None)
    def tail(i: int) -> FrozenSet[Word]:
        if i == len(units):
            return frozenset({()})
        out = set()
        for j in range(i + 1, min(len(units), i + max_key_len) + 1):
            for exp in entries.get("".join(units[i:j]), ()):
                for rest in tail(j):
                    out.add(exp + rest)
        return frozenset(out)

    return set(tail(0))


def prefix_info(lang: Set[Word], prefix: Sequence[str]) -> Tuple[bool, bool, float]:
    """(feasible, full match, shortest completion) of ``prefix`` by enumeration."""
    prefix = tuple(prefix)
    n = len(prefix)
    rem = [len(w) - n for w in lang if w[:n] == prefix]
    return bool(rem), prefix in lang, min(rem) if rem else math.inf


def all_segmentations(g: str, p: Sequence[str], max_g: int, max_p: int):
    """Every monotone segmentation of (g, p) into non-empty chunk pairs."""
    p = tuple(p)
    if not g and not p:
        yield ()
        return
    if not g or not p:
        return
    for a in range(1, min(max_g, len(g)) + 1):
        for b in range(1, min(max_p, len(p)) + 1):
            for rest in all_segmentations(g[a:], p[b:], max_g, max_p):
                yield ((g[:a], p[:b]),) + rest


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Textbook full-table Levenshtein distance."""
    D = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int64)
    D[:, 0] = np.arange(len(a) + 1)
    D[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            D[i, j] = min(D[i - 1, j] + 1, D[i, j - 1] + 1, D[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return int(D[-1, -1])


class _Exhausted(Exception):
    pass


def reference_constrained(
    logp: np.ndarray,
    surfaces: Sequence[str],
    blank_id: int,
    prosody: Set[str],
    lang: Set[Word],
    beam_width: int = 4,
    max_backtracks: int = 256,
) -> Optional[Tuple[List[int], List[int]]]:
    """Replay the constrained greedy-with-backtracking policy on explicit sets.

    Returns ``(emitted token ids, per-retained-frame chosen ids)`` or ``None``
    when the policy gives up.
    """
    top = np.argmax(logp, axis=1)
    keep = [t for t in range(logp.shape[0]) if top[t] != blank_id]
    n = len(keep)
    counter = [0]

    def completion(pref: Word) -> float:
        return prefix_info(lang, pref)[2]

    def search(k: int, pref: Word, prev: Optional[int], emitted: List[int], chosen: List[int]):
        if k == n:
            return (emitted, chosen) if pref in lang else None
        budget = n - k - 1
        row = logp[keep[k]]
        adjacent = prev is not None and keep[k] == keep[k - 1] + 1
        cands = []
        for tid, s in enumerate(surfaces):
            if tid == blank_id:
                continue
            if adjacent and tid == prev:
                if completion(pref) <= budget:
                    cands.append((tid, pref, True))
            elif s in prosody:
                if completion(pref) <= budget:
                    cands.append((tid, pref, False))
            else:
                nxt = pref + (s,)
                if completion(nxt) <= budget:
                    cands.append((tid, nxt, False))
        cands.sort(key=lambda c: (-float(row[c[0]]), c[0]))
        cands = cands[:beam_width]
        for i, (tid, nxt, collapsed) in enumerate(cands):
            if i:
                if counter[0] >= max_backtracks:
                    raise _Exhausted
                counter[0] += 1
            r = search(k + 1, nxt, tid, emitted if collapsed else emitted + [tid], chosen + [tid])
            if r is not None:
                return r
        return None

    try:
        return search(0, (), None, [], [])
    except _Exhausted:
        return None


def random_rows(rng: np.random.Generator, n: int, v: int, peak: float = 3.0) -> np.ndarray:
    """Random normalized log rows with a bit of structure."""
    logits = rng.normal(size=(n, v)) * peak
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return np.log(p)


PHONES = ("a", "b", "c", "d", "e")
PROSODY = ("[", "#")
ALPHABET = "wxyz"


def random_instance(rng: np.random.Generator, max_units: int = 4, max_keys: int = 5,
                    max_exps: int = 3, max_exp_len: int = 4):
    """Small (grapheme, dictionary) pair; keys are mostly substrings of the grapheme."""
    L = int(rng.integers(0, max_units + 1))
    units = tuple(ALPHABET[int(i)] for i in rng.integers(0, len(ALPHABET), size=L))
    entries: Dict[str, Set[Word]] = {}
    for _ in range(int(rng.integers(1, max_keys + 1))):
        if L and rng.random() < 0.8:
            i = int(rng.integers(0, L))
            j = int(rng.integers(i + 1, min(L, i + 2) + 1))
            key = "".join(units[i:j])
        else:
            key = "".join(ALPHABET[int(i)] for i in rng.integers(0, len(ALPHABET), size=int(rng.integers(1, 3))))
        exps = entries.setdefault(key, set())
        for _ in range(int(rng.integers(1, max_exps + 1))):
            if len(exps) >= max_exps:
                break
            k = int(rng.integers(1, max_exp_len + 1))
            exps.add(tuple(PHONES[int(i)] for i in rng.integers(0, len(PHONES), size=k)))
    return units, entries


def emission_near(rng: np.random.Generator, word: Sequence[str], surfaces: Sequence[str],
                  blank_id: int, max_frames: int = 12, noise: float = 1.5) -> np.ndarray:
    """Noisy log rows whose clean argmax path spells ``word`` (plus random prosody/blank frames)."""
    idx = {s: i for i, s in enumerate(surfaces)}
    path: List[int] = []
    for s in word:
        if path and (path[-1] == idx[s] or rng.random() < 0.3):
            path.append(blank_id)
        if rng.random() < 0.15:
            path.append(idx[PROSODY[int(rng.integers(0, len(PROSODY)))]])
        path.extend([idx[s]] * int(rng.integers(1, 3)))
    path = path[:max_frames]
    V = len(surfaces)
    logits = rng.normal(size=(len(path), V)) * noise
    for t, k in enumerate(path):
        logits[t, k] += 3.0
    logits -= logits.max(axis=1, keepdims=True) if len(path) else 0.0
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True) if len(path) else 1.0
    return np.log(p).reshape(len(path), V)
