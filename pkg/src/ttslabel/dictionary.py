"""External g2p dictionary: grapheme keys mapped to sets of phoneme expansions."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple, Union

from ttslabel.align import AlignedPair

Expansion = Tuple[str, ...]


class G2pDictionary:
    """Immutable key -> expansion-set map.

    Matching against it is boolean; there are no expansion weights, and extra
    (imprecise) expansions only ever enlarge the accepted language.
    """

    def __init__(self, entries: Optional[Mapping[str, Iterable[Iterable[str]]]] = None):
        built: Dict[str, FrozenSet[Expansion]] = {}
        for key, expansions in (entries or {}).items():
            if not key:
                raise ValueError("dictionary keys must be non-empty")
            exps = frozenset(tuple(e) for e in expansions)
            if any(len(e) == 0 for e in exps):
                raise ValueError(f"empty expansion for key {key!r}")
            if exps:
                built[key] = exps
        self._entries = built
        self._max_key_len = max((len(k) for k in built), default=0)

    @property
    def entries(self) -> Mapping[str, FrozenSet[Expansion]]:
        return self._entries

    @property
    def key_count(self) -> int:
        return len(self._entries)

    @property
    def expansion_count(self) -> int:
        return sum(len(v) for v in self._entries.values())

    @property
    def mean_expansions(self) -> float:
        return self.expansion_count / self.key_count if self._entries else 0.0

    @property
    def max_key_len(self) -> int:
        """Longest key length in characters."""
        return self._max_key_len

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, G2pDictionary):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"G2pDictionary(keys={self.key_count}, mean_expansions={self.mean_expansions:.3f})"

    def lookup(self, key: str) -> FrozenSet[Expansion]:
        return self._entries.get(key, frozenset())

    def items(self):
        return self._entries.items()

    def lines(self) -> List[str]:
        return [
            f"{key}\t{' '.join(exp)}"
            for key in sorted(self._entries)
            for exp in sorted(self._entries[key])
        ]

    def serialize(self) -> str:
        lines = self.lines()
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "G2pDictionary":
        entries: Dict[str, Set[Expansion]] = {}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1].split():
                raise ValueError(f"{path}:{n}: expected 'key<TAB>expansion'")
            entries.setdefault(cols[0], set()).add(tuple(cols[1].split()))
        return cls(entries)

    def stats_line(self) -> str:
        return f"keys={self.key_count} mean_expansions={self.mean_expansions:.4f}"


def build_dictionary(aligned: Iterable[AlignedPair], keep_multi_unit: bool = False) -> G2pDictionary:
    """Turn every alignment segment into a key/expansion entry.

    With ``keep_multi_unit`` the whole source pair (e.g. 化学 -> ka ga ku) is
    also kept as an entry next to its minimum-unit pieces.
    """
    entries: Dict[str, Set[Expansion]] = {}
    for pair in aligned:
        for g, p in pair.segments:
            entries.setdefault(g, set()).add(tuple(p))
        if keep_multi_unit:
            entries.setdefault(pair.grapheme, set()).add(tuple(pair.phonemes))
    return G2pDictionary(entries)


def lookup(dictionary: G2pDictionary, key: str) -> FrozenSet[Expansion]:
    return dictionary.lookup(key)


def merge(d1: G2pDictionary, d2: G2pDictionary) -> G2pDictionary:
    entries: Dict[str, Set[Expansion]] = {}
    for d in (d1, d2):
        for key, exps in d.items():
            entries.setdefault(key, set()).update(exps)
    return G2pDictionary(entries)


@dataclass
class TrieNode:
    children: Dict[str, int] = field(default_factory=dict)
    terminal: bool = False


class ExpansionTrie:
    """Prefix tree over the phoneme tokens of a set of expansions."""

    def __init__(self, expansions: Iterable[Expansion] = ()):
        self.nodes: List[TrieNode] = [TrieNode()]
        for exp in expansions:
            self.insert(exp)

    def insert(self, expansion: Expansion) -> int:
        node = 0
        for tok in expansion:
            nxt = self.nodes[node].children.get(tok)
            if nxt is None:
                nxt = len(self.nodes)
                self.nodes.append(TrieNode())
                self.nodes[node].children[tok] = nxt
            node = nxt
        self.nodes[node].terminal = True
        return node

    def walk(self, tokens: Iterable[str], node: int = 0) -> Optional[int]:
        for tok in tokens:
            node = self.nodes[node].children.get(tok)
            if node is None:
                return None
        return node

    def expansions(self) -> Set[Expansion]:
        out: Set[Expansion] = set()
        stack: List[Tuple[int, Expansion]] = [(0, ())]
        while stack:
            node, path = stack.pop()
            if self.nodes[node].terminal:
                out.add(path)
            for tok, child in self.nodes[node].children.items():
                stack.append((child, path + (tok,)))
        return out
