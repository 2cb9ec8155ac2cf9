"""Grapheme-consistent decoding of phonemic/prosodic TTS labels from CTC emissions."""

from ttslabel.errors import (
    BlankInSequence,
    EmptyReference,
    LengthMismatch,
    NoAlignablePairs,
    NoCover,
    TtsLabelError,
    Unalignable,
    UnknownToken,
    VocabMismatch,
)
from ttslabel.labels import (
    GraphemeSequence,
    Kind,
    MixedLabelSequence,
    Token,
    Vocabulary,
    parse_mixed,
    split_streams,
)

__version__ = "0.1.0"

__all__ = [
    "BlankInSequence",
    "EmptyReference",
    "GraphemeSequence",
    "Kind",
    "LengthMismatch",
    "MixedLabelSequence",
    "NoAlignablePairs",
    "NoCover",
    "Token",
    "TtsLabelError",
    "Unalignable",
    "UnknownToken",
    "VocabMismatch",
    "Vocabulary",
    "parse_mixed",
    "split_streams",
]
