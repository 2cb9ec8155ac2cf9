"""Per-frame log-probability matrices and their on-disk formats.

Binary layout (little-endian)::

    b"EMIT1" | u32 N | u32 V | N*V float32, row-major

The vocabulary travels in a sidecar file (see :class:`Vocabulary`). Hand-made
matrices may instead be TSV: a header row of token surfaces, then one row of
log-probabilities per frame. Columns are matched to the vocabulary by surface;
vocabulary tokens without a column get ``-inf``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ttslabel.errors import UnknownToken, VocabMismatch
from ttslabel.labels import Vocabulary

MAGIC = b"EMIT1"
_HEADER = struct.Struct("<5sII")
ROW_TOL = 1e-3


def row_logsumexp(logp: np.ndarray) -> np.ndarray:
    if logp.shape[0] == 0:
        return np.zeros(0)
    m = np.max(logp, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return (m + np.log(np.sum(np.exp(logp - m), axis=1, keepdims=True)))[:, 0]


@dataclass(frozen=True, eq=False)
class EmissionMatrix:
    logp: np.ndarray
    vocab: Vocabulary
    frame_rate: Optional[float] = None

    def __post_init__(self):
        logp = np.asarray(self.logp, dtype=np.float64)
        if logp.ndim != 2:
            if logp.size == 0:
                logp = logp.reshape(0, len(self.vocab))
            else:
                raise ValueError(f"emission matrix must be 2-D, got shape {logp.shape}")
        if logp.shape[1] != len(self.vocab):
            raise VocabMismatch(
                f"emission has {logp.shape[1]} columns but the vocabulary has {len(self.vocab)} tokens"
            )
        lse = row_logsumexp(logp)
        bad = np.flatnonzero(~(np.abs(lse) <= ROW_TOL))
        if bad.size:
            raise ValueError(f"frame {int(bad[0])} is not a normalized log-distribution (lse={lse[bad[0]]:.4g})")
        logp.setflags(write=False)
        object.__setattr__(self, "logp", logp)

    @property
    def num_frames(self) -> int:
        return self.logp.shape[0]

    @classmethod
    def from_probs(cls, probs, vocab: Vocabulary, normalize: bool = True) -> "EmissionMatrix":
        p = np.asarray(probs, dtype=np.float64)
        if p.size == 0:
            p = p.reshape(0, len(vocab))
        if normalize and p.shape[0]:
            p = p / p.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            return cls(np.log(p), vocab)

    def argmax(self) -> np.ndarray:
        return np.argmax(self.logp, axis=1) if self.num_frames else np.zeros(0, dtype=np.int64)

    def select(self, frames) -> "EmissionMatrix":
        return EmissionMatrix(self.logp[np.asarray(frames, dtype=np.int64)], self.vocab, self.frame_rate)

    def to_bytes(self) -> bytes:
        n, v = self.logp.shape
        return _HEADER.pack(MAGIC, n, v) + self.logp.astype("<f4").tobytes(order="C")

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())


def from_bytes(data: bytes, vocab: Vocabulary) -> EmissionMatrix:
    if len(data) < _HEADER.size or data[:5] != MAGIC:
        raise ValueError("not an EMIT1 emission file")
    _, n, v = _HEADER.unpack_from(data)
    body = data[_HEADER.size :]
    if len(body) != 4 * n * v:
        raise ValueError(f"EMIT1 body holds {len(body)} bytes, expected {4 * n * v}")
    logp = np.frombuffer(body, dtype="<f4").reshape(n, v).astype(np.float64)
    return EmissionMatrix(logp, vocab)


def read_tsv(text: str, vocab: Vocabulary) -> EmissionMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty emission TSV")
    header = lines[0].split("\t")
    cols = []
    for surface in header:
        if surface == vocab.blank_surface:
            cols.append(vocab.blank_id)
        elif surface in vocab.index:
            cols.append(vocab.index[surface])
        else:
            raise UnknownToken(surface)
    logp = np.full((len(lines) - 1, len(vocab)), -np.inf)
    for r, line in enumerate(lines[1:]):
        vals = line.split("\t")
        if len(vals) != len(header):
            raise ValueError(f"emission TSV row {r + 2} has {len(vals)} fields, expected {len(header)}")
        logp[r, cols] = [float(x) for x in vals]
    return EmissionMatrix(logp, vocab)


def write_tsv(em: EmissionMatrix) -> str:
    rows = ["\t".join(em.vocab.surfaces())]
    rows += ["\t".join(repr(float(x)) for x in row) for row in em.logp]
    return "\n".join(rows) + "\n"


def load(path: Union[str, Path], vocab: Vocabulary) -> EmissionMatrix:
    data = Path(path).read_bytes()
    if data[:5] == MAGIC:
        return from_bytes(data, vocab)
    return read_tsv(data.decode("utf-8"), vocab)


def filter_nonblank_frames(em: EmissionMatrix) -> Tuple[EmissionMatrix, np.ndarray]:
    """Keep frames whose top token is not blank; also return their original indices."""
    keep = np.flatnonzero(em.argmax() != em.vocab.blank_id)
    return em.select(keep), keep
