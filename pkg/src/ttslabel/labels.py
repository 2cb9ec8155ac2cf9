"""Token universe for mixed phonemic/prosodic TTS labels.

A TTS label is a flat sequence that interleaves mora-level phoneme tokens
with the five Tokyo-dialect pitch-accent markers::

    _   pause
    [   accent rise (low -> high)
    ]   accent fall (high -> low)
    #   accent-phrase boundary
    ?   raise-type boundary pitch movement

Phoneme surfaces are opaque strings; nothing here looks inside them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from ttslabel.errors import BlankInSequence, UnknownToken

PROSODY_SURFACES: Tuple[str, ...] = ("_", "[", "]", "#", "?")
DEFAULT_BLANK = "<blank>"
_BLANK_HEADER = "#blank"


class Kind(enum.Enum):
    PHONEME = "phoneme"
    PROSODY = "prosody"
    BLANK = "blank"


@dataclass(frozen=True)
class Token:
    kind: Kind
    surface: Optional[str] = None  # None only for BLANK

    def __post_init__(self):
        if self.kind is Kind.BLANK:
            if self.surface is not None:
                raise ValueError("blank token carries no surface")
            return
        if not self.surface:
            raise ValueError("token surface must be a non-empty string")
        if self.kind is Kind.PROSODY and self.surface not in PROSODY_SURFACES:
            raise ValueError(f"{self.surface!r} is not a prosodic label")
        if self.kind is Kind.PHONEME and self.surface in PROSODY_SURFACES:
            raise ValueError(f"{self.surface!r} is reserved for prosody")

    @classmethod
    def phoneme(cls, surface: str) -> "Token":
        return cls(Kind.PHONEME, surface)

    @classmethod
    def prosody(cls, surface: str) -> "Token":
        return cls(Kind.PROSODY, surface)

    @property
    def is_phoneme(self) -> bool:
        return self.kind is Kind.PHONEME

    @property
    def is_prosody(self) -> bool:
        return self.kind is Kind.PROSODY

    def __str__(self) -> str:
        return self.surface if self.surface is not None else DEFAULT_BLANK


BLANK = Token(Kind.BLANK)


def classify(surface: str) -> Token:
    """Build a non-blank token, inferring its kind from the surface."""
    if surface in PROSODY_SURFACES:
        return Token(Kind.PROSODY, surface)
    return Token(Kind.PHONEME, surface)


class Vocabulary:
    """Dense id assignment over non-blank tokens plus exactly one blank.

    Args:
        surfaces: token surfaces in id order. The blank surface may appear
            among them; otherwise the blank is prepended at id 0.
        blank: surface used for the blank in files and emissions.
    """

    def __init__(self, surfaces: Iterable[str], blank: str = DEFAULT_BLANK):
        surfaces = list(surfaces)
        if blank not in surfaces:
            surfaces.insert(0, blank)
        tokens: List[Token] = []
        index: Dict[str, int] = {}
        blank_id = -1
        for i, s in enumerate(surfaces):
            if s in index or (s == blank and blank_id >= 0):
                raise ValueError(f"duplicate vocabulary entry {s!r}")
            if s == blank:
                blank_id = i
                tokens.append(BLANK)
            else:
                tokens.append(classify(s))
                index[s] = i
        self.tokens: Tuple[Token, ...] = tuple(tokens)
        self.index: Dict[str, int] = index
        self.blank_id: int = blank_id
        self.blank_surface: str = blank

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.surfaces() == other.surfaces() and self.blank_id == other.blank_id

    def __contains__(self, surface: str) -> bool:
        return surface in self.index

    def surfaces(self) -> List[str]:
        return [self.blank_surface if t.kind is Kind.BLANK else t.surface for t in self.tokens]

    def id_of(self, surface: str) -> int:
        try:
            return self.index[surface]
        except KeyError:
            if surface == self.blank_surface:
                return self.blank_id
            raise UnknownToken(surface) from None

    def token(self, token_id: int) -> Token:
        return self.tokens[token_id]

    def ids_of_kind(self, kind: Kind) -> List[int]:
        return [i for i, t in enumerate(self.tokens) if t.kind is kind]

    def save(self, path: Union[str, Path]) -> None:
        lines = [f"{_BLANK_HEADER} {self.blank_surface}"] + self.surfaces()
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        """Read a vocabulary file: optional ``#blank <surface>`` header, then one surface per line."""
        blank = DEFAULT_BLANK
        surfaces = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
            line = line.strip()
            if not line:
                continue
            if n == 0 and line.startswith(_BLANK_HEADER + " "):
                blank = line[len(_BLANK_HEADER) + 1 :].strip()
                continue
            surfaces.append(line)
        return cls(surfaces, blank=blank)


@dataclass(frozen=True)
class MixedLabelSequence:
    tokens: Tuple[Token, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if any(t.kind is Kind.BLANK for t in self.tokens):
            raise BlankInSequence("mixed label sequences never contain blank")

    @classmethod
    def from_surfaces(cls, surfaces: Iterable[str]) -> "MixedLabelSequence":
        return cls(tuple(classify(s) for s in surfaces))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def phoneme_subsequence(self) -> List[Token]:
        return [t for t in self.tokens if t.kind is Kind.PHONEME]

    def prosody_subsequence(self) -> List[Token]:
        return [t for t in self.tokens if t.kind is Kind.PROSODY]

    def phonemes(self) -> Tuple[str, ...]:
        """Surfaces of the phoneme subsequence."""
        return tuple(t.surface for t in self.tokens if t.kind is Kind.PHONEME)

    def serialize(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    def __str__(self) -> str:
        return self.serialize()


def parse_mixed(text: str, vocab: Optional[Vocabulary] = None) -> MixedLabelSequence:
    """Tokenize a whitespace-separated label line.

    With a vocabulary every surface must be known to it and kinds come from
    the vocabulary; without one, kinds are inferred from the surface.
    """
    tokens = []
    for surface in text.split():
        if vocab is None:
            if surface == DEFAULT_BLANK:
                raise BlankInSequence(surface)
            tokens.append(classify(surface))
            continue
        if surface == vocab.blank_surface:
            raise BlankInSequence(surface)
        if surface not in vocab.index:
            raise UnknownToken(surface)
        tokens.append(vocab.tokens[vocab.index[surface]])
    return MixedLabelSequence(tuple(tokens))


Positioned = List[Tuple[int, Token]]


def split_streams(seq: MixedLabelSequence) -> Tuple[Positioned, Positioned]:
    """Partition a mixed sequence into (phoneme, prosody) streams with original positions."""
    ph: Positioned = []
    ps: Positioned = []
    for i, t in enumerate(seq.tokens):
        (ph if t.kind is Kind.PHONEME else ps).append((i, t))
    return ph, ps


def merge_streams(phonemes: Positioned, prosody: Positioned) -> MixedLabelSequence:
    """Inverse of :func:`split_streams`."""
    merged = sorted(phonemes + prosody, key=lambda p: p[0])
    return MixedLabelSequence(tuple(t for _, t in merged))


@dataclass(frozen=True)
class GraphemeSequence:
    """Grapheme units (one per character by default)."""

    units: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if any(not u for u in self.units):
            raise ValueError("grapheme units must be non-empty strings")

    @classmethod
    def from_text(cls, text: str) -> "GraphemeSequence":
        """One unit per non-whitespace character."""
        return cls(tuple(ch for ch in text if not ch.isspace()))

    def __len__(self) -> int:
        return len(self.units)

    def span(self, start: int, end: int) -> str:
        return "".join(self.units[start:end])

    def text(self) -> str:
        return "".join(self.units)


def read_label_file(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """Read ``[id<TAB>]labels`` lines; ids default to 1-based line numbers."""
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if "\t" in line:
            uid, text = line.split("\t", 1)
        else:
            uid, text = str(n), line
        out.append((uid, text))
    return out


def as_phoneme_tuple(tokens: Sequence[Union[Token, str]]) -> Tuple[str, ...]:
    return tuple(t.surface if isinstance(t, Token) else t for t in tokens)
