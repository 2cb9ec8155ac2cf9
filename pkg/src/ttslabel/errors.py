"""Exception types shared across the package."""

from __future__ import annotations


class TtsLabelError(Exception):
    """Base class for all errors raised by this package."""


class UnknownToken(TtsLabelError, KeyError):
    def __init__(self, surface: str):
        super().__init__(surface)
        self.surface = surface

    def __str__(self) -> str:
        return f"unknown token {self.surface!r}"


class BlankInSequence(TtsLabelError, ValueError):
    pass


class NoAlignablePairs(TtsLabelError, ValueError):
    pass


class Unalignable(TtsLabelError, ValueError):
    pass


class NoCover(TtsLabelError, ValueError):
    """No segmentation of the grapheme sequence into dictionary keys exists."""


class VocabMismatch(TtsLabelError, ValueError):
    pass


class LengthMismatch(TtsLabelError, ValueError):
    pass


class EmptyReference(TtsLabelError, ValueError):
    pass
