"""Prefix-feasibility automaton for one grapheme sequence under a g2p dictionary.

States are ``(g_pos, trie_node)`` pairs: ``g_pos`` is the first grapheme unit
not yet covered and ``trie_node`` is a node in the combined trie of every
expansion of every key that starts at ``g_pos``. When a consumed phoneme
completes an expansion the cursor jumps eagerly to ``(end, root)``, so a
frontier (a set of states) tracks all segmentations and expansion choices at
once. States that cannot reach ``(L, root)`` are pruned at build time, which
makes "frontier non-empty" equivalent to "prefix extends to a full reading".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from ttslabel.dictionary import G2pDictionary
from ttslabel.errors import NoCover
from ttslabel.labels import GraphemeSequence, Kind, Token

DEFAULT_MAX_KEY_LEN = 4
INF = math.inf


class _PosTrie:
    __slots__ = ("children", "ends")

    def __init__(self):
        self.children: List[Dict[str, int]] = [{}]
        self.ends: List[Set[int]] = [set()]

    def insert(self, expansion: Sequence[str], end: int) -> None:
        node = 0
        for tok in expansion:
            nxt = self.children[node].get(tok)
            if nxt is None:
                nxt = len(self.children)
                self.children.append({})
                self.ends.append(set())
                self.children[node][tok] = nxt
            node = nxt
        self.ends[node].add(end)


class GraphemeLattice:
    """Built by :func:`build_lattice`; read-only afterwards."""

    def __init__(
        self,
        grapheme: GraphemeSequence,
        state_keys: List[Tuple[int, int]],
        transitions: List[Dict[str, Tuple[int, ...]]],
        min_remaining: List[float],
        start: int,
        accept: int,
    ):
        self.grapheme = grapheme
        self.state_keys = state_keys
        self.transitions = transitions
        self.min_remaining = min_remaining
        self.start = start
        self.accept = accept
        self._step_cache: Dict[Tuple[FrozenSet[int], str], FrozenSet[int]] = {}
        self._allowed_cache: Dict[FrozenSet[int], FrozenSet[str]] = {}

    @property
    def num_states(self) -> int:
        return len(self.state_keys)

    def cursor(self) -> "MatchCursor":
        return MatchCursor(frozenset((self.start,)), 0, self)

    def step(self, frontier: FrozenSet[int], phoneme: str) -> FrozenSet[int]:
        key = (frontier, phoneme)
        out = self._step_cache.get(key)
        if out is None:
            nxt: Set[int] = set()
            for s in frontier:
                nxt.update(self.transitions[s].get(phoneme, ()))
            out = frozenset(nxt)
            self._step_cache[key] = out
        return out

    def allowed(self, frontier: FrozenSet[int]) -> FrozenSet[str]:
        """Phonemes that keep ``frontier`` feasible."""
        out = self._allowed_cache.get(frontier)
        if out is None:
            toks: Set[str] = set()
            for s in frontier:
                toks.update(self.transitions[s])
            out = frozenset(toks)
            self._allowed_cache[frontier] = out
        return out

    def tokens(self) -> Set[str]:
        return {tok for t in self.transitions for tok in t}

    def min_to_accept(self, frontier: FrozenSet[int]) -> float:
        return min((self.min_remaining[s] for s in frontier), default=INF)

    def dump(self) -> str:
        """Human-readable state graph, one state per line."""
        lines = [f"# grapheme={self.grapheme.text()} states={self.num_states}"]
        for s, (pos, node) in enumerate(self.state_keys):
            tags = []
            if s == self.start:
                tags.append("start")
            if s == self.accept:
                tags.append("accept")
            arcs = " ".join(
                f"{tok}->{','.join(str(t) for t in sorted(dst))}"
                for tok, dst in sorted(self.transitions[s].items())
            )
            lines.append(
                f"{s}\t({pos},{node})\tmin={self.min_remaining[s]}\t{' '.join(tags)}\t{arcs}".rstrip()
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class MatchCursor:
    frontier: FrozenSet[int]
    consumed: int = 0
    lattice: Optional[GraphemeLattice] = field(default=None, compare=False, repr=False)

    @property
    def feasible(self) -> bool:
        return bool(self.frontier)


def build_lattice(
    g: Union[GraphemeSequence, str],
    dictionary: G2pDictionary,
    max_key_len: int = DEFAULT_MAX_KEY_LEN,
) -> GraphemeLattice:
    """Build the feasibility lattice of ``g``.

    Raises:
        NoCover: ``g`` cannot be segmented into dictionary keys of at most
            ``max_key_len`` units.
    """
    if isinstance(g, str):
        g = GraphemeSequence.from_text(g)
    L = len(g)
    tries: List[_PosTrie] = []
    for i in range(L):
        trie = _PosTrie()
        for j in range(i + 1, min(L, i + max_key_len) + 1):
            for exp in dictionary.lookup(g.span(i, j)):
                trie.insert(exp, j)
        tries.append(trie)

    # backward DP: shortest completion from each trie node, positions right to left
    min_root = [INF] * (L + 1)
    min_rem: List[List[float]] = [[] for _ in range(L)]
    min_root[L] = 0
    for i in range(L - 1, -1, -1):
        trie = tries[i]
        rem = [INF] * len(trie.children)
        # children always have larger ids than their parent
        for node in range(len(trie.children) - 1, -1, -1):
            best = INF
            for child in trie.children[node].values():
                after = min([rem[child]] + [min_root[j] for j in trie.ends[child]])
                best = min(best, 1 + after)
            rem[node] = best
        min_rem[i] = rem
        min_root[i] = rem[0]
    if min_root[0] == INF:
        raise NoCover(f"no segmentation of {g.text()!r} into dictionary keys")

    ids: Dict[Tuple[int, int], int] = {}
    keys: List[Tuple[int, int]] = []

    def sid(key: Tuple[int, int]) -> int:
        if key not in ids:
            ids[key] = len(keys)
            keys.append(key)
        return ids[key]

    start = sid((0, 0))
    accept = sid((L, 0))
    transitions: Dict[int, Dict[str, Tuple[int, ...]]] = {}
    stack = [(0, 0)]
    seen = {(0, 0)}
    while stack:
        i, node = stack.pop()
        arcs: Dict[str, Tuple[int, ...]] = {}
        if i < L:
            trie = tries[i]
            for tok, child in trie.children[node].items():
                dst = []
                if min_rem[i][child] < INF:
                    dst.append((i, child))
                dst.extend((j, 0) for j in sorted(trie.ends[child]) if min_root[j] < INF)
                if not dst:
                    continue
                arcs[tok] = tuple(sid(d) for d in dst)
                for d in dst:
                    if d not in seen:
                        seen.add(d)
                        stack.append(d)
        transitions[sid((i, node))] = arcs

    def remaining(key: Tuple[int, int]) -> float:
        i, node = key
        return 0 if i == L else min_rem[i][node]

    return GraphemeLattice(
        grapheme=g,
        state_keys=keys,
        transitions=[transitions.get(s, {}) for s in range(len(keys))],
        min_remaining=[remaining(k) for k in keys],
        start=start,
        accept=accept,
    )


def _surface(phoneme: Union[Token, str]) -> str:
    if isinstance(phoneme, Token):
        if phoneme.kind is not Kind.PHONEME:
            raise ValueError(f"only phoneme tokens advance a cursor, got {phoneme.kind.value}")
        return phoneme.surface
    return phoneme


def advance(cursor: MatchCursor, phoneme: Union[Token, str]) -> MatchCursor:
    """Consume one phoneme; the result may be infeasible (empty frontier)."""
    surface = _surface(phoneme)
    if not cursor.frontier:
        return MatchCursor(cursor.frontier, cursor.consumed + 1, cursor.lattice)
    return MatchCursor(cursor.lattice.step(cursor.frontier, surface), cursor.consumed + 1, cursor.lattice)


def advance_all(cursor: MatchCursor, phonemes: Iterable[Union[Token, str]]) -> MatchCursor:
    for p in phonemes:
        cursor = advance(cursor, p)
    return cursor


def is_full_match(cursor: MatchCursor) -> bool:
    return cursor.lattice is not None and cursor.lattice.accept in cursor.frontier


def min_phonemes_to_accept(cursor: MatchCursor) -> float:
    """Shortest number of further phonemes reaching a full match; ``math.inf`` if none."""
    if not cursor.frontier:
        return INF
    return cursor.lattice.min_to_accept(cursor.frontier)


def matches(lattice: GraphemeLattice, phonemes: Iterable[Union[Token, str]]) -> bool:
    return is_full_match(advance_all(lattice.cursor(), phonemes))
