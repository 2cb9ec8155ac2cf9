"""Many-to-many grapheme/phoneme alignment trained with EM.

The model is a single joint distribution ``theta`` over chunk pairs
``(grapheme chunk, phoneme chunk)``; an alignment of a pair is a monotone
segmentation of both sides into the same number of non-empty chunks, scored
as

    prod_c theta[c] ** w(c),    w(c) = (|g_c| + |p_c|) ** length_penalty

With ``length_penalty=0`` this is the plain joint multigram model. With
``length_penalty=1`` every full alignment of a pair has the same total
exponent, so long chunks get no head start over their decompositions and
shared sub-chunks win (this is what splits 化学 into 化 + 学).
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from ttslabel.errors import NoAlignablePairs, Unalignable

log = logging.getLogger(__name__)

Chunk = Tuple[str, Tuple[str, ...]]
Pair = Tuple[str, Tuple[str, ...]]
# (g_start, p_start, g_end, p_end, chunk)
Edge = Tuple[int, int, int, int, Chunk]

DEFAULT_MAX_G = 3
DEFAULT_MAX_P = 6
DEFAULT_MAX_ITERS = 30
DEFAULT_TOL = 1e-6
DEFAULT_LENGTH_PENALTY = 1.0

_TIE_EPS = 1e-12
_PARAMS_TAG = "#params"


@dataclass
class AlignmentModel:
    chunk_prob: Dict[Chunk, float]
    max_g: int = DEFAULT_MAX_G
    max_p: int = DEFAULT_MAX_P
    length_penalty: float = DEFAULT_LENGTH_PENALTY
    log_likelihoods: List[float] = field(default_factory=list)
    skipped: List[int] = field(default_factory=list)

    def weight(self, chunk: Chunk) -> float:
        return chunk_weight(chunk, self.length_penalty)

    def log_score(self, chunk: Chunk) -> float:
        """Log contribution of one chunk; -inf when the chunk is unknown."""
        p = self.chunk_prob.get(chunk, 0.0)
        if p <= 0.0:
            return -math.inf
        return self.weight(chunk) * math.log(p)

    def save(self, path: Union[str, Path]) -> None:
        lines = [
            f"{_PARAMS_TAG}\tmax_g={self.max_g}\tmax_p={self.max_p}"
            f"\tlength_penalty={self.length_penalty!r}"
        ]
        for (g, p), prob in sorted(self.chunk_prob.items()):
            lines.append(f"{g}\t{' '.join(p)}\t{prob!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AlignmentModel":
        params = {}
        probs: Dict[Chunk, float] = {}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            cols = line.split("\t")
            if cols[0] == _PARAMS_TAG:
                params.update(kv.split("=", 1) for kv in cols[1:])
                continue
            if len(cols) != 3:
                raise ValueError(f"{path}:{n}: expected 3 tab-separated columns")
            probs[(cols[0], tuple(cols[1].split()))] = float(cols[2])
        return cls(
            probs,
            max_g=int(params.get("max_g", DEFAULT_MAX_G)),
            max_p=int(params.get("max_p", DEFAULT_MAX_P)),
            length_penalty=float(params.get("length_penalty", DEFAULT_LENGTH_PENALTY)),
        )


@dataclass(frozen=True)
class AlignedPair:
    segments: Tuple[Chunk, ...]
    grapheme: str
    phonemes: Tuple[str, ...]

    def __post_init__(self):
        if "".join(g for g, _ in self.segments) != self.grapheme:
            raise ValueError("grapheme chunks do not concatenate to the source")
        if tuple(t for _, p in self.segments for t in p) != tuple(self.phonemes):
            raise ValueError("phoneme chunks do not concatenate to the source")


def chunk_weight(chunk: Chunk, length_penalty: float) -> float:
    if length_penalty == 0.0:
        return 1.0
    return float(len(chunk[0]) + len(chunk[1])) ** length_penalty


def is_alignable(grapheme: str, phonemes: Sequence[str], max_g: int, max_p: int) -> bool:
    """Counting test: some segmentation into k non-empty chunk pairs exists."""
    G, P = len(grapheme), len(phonemes)
    if G == 0 or P == 0:
        return False
    k_min = max(-(-G // max_g), -(-P // max_p))
    k_max = min(G, P)
    return k_min <= k_max


def pair_edges(grapheme: str, phonemes: Sequence[str], max_g: int, max_p: int) -> List[Edge]:
    """All chunk edges of the alignment grid, restricted to ones on a complete path."""
    G, P = len(grapheme), len(phonemes)
    phonemes = tuple(phonemes)
    fwd = [[False] * (P + 1) for _ in range(G + 1)]
    fwd[0][0] = True
    for i in range(G + 1):
        for j in range(P + 1):
            if not fwd[i][j]:
                continue
            for a in range(1, min(max_g, G - i) + 1):
                for b in range(1, min(max_p, P - j) + 1):
                    fwd[i + a][j + b] = True
    bwd = [[False] * (P + 1) for _ in range(G + 1)]
    bwd[G][P] = True
    for i in range(G, -1, -1):
        for j in range(P, -1, -1):
            if bwd[i][j]:
                continue
            for a in range(1, min(max_g, G - i) + 1):
                if any(bwd[i + a][j + b] for b in range(1, min(max_p, P - j) + 1)):
                    bwd[i][j] = True
                    break
    edges = []
    for i in range(G):
        for j in range(P):
            if not fwd[i][j]:
                continue
            for a in range(1, min(max_g, G - i) + 1):
                for b in range(1, min(max_p, P - j) + 1):
                    if bwd[i + a][j + b]:
                        edges.append((i, j, i + a, j + b, (grapheme[i : i + a], phonemes[j : j + b])))
    return edges


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def _expect(edges: List[Edge], end: Tuple[int, int], logw: Dict[Chunk, float]):
    """Forward-backward over one pair's edges; returns (log Z, chunk -> expected count)."""
    alpha: Dict[Tuple[int, int], float] = defaultdict(lambda: -math.inf)
    alpha[(0, 0)] = 0.0
    # edges are generated in (g_start, p_start) order, which is topological
    for i, j, i2, j2, c in edges:
        s = alpha[(i, j)] + logw[c]
        alpha[(i2, j2)] = _logaddexp(alpha[(i2, j2)], s)
    beta: Dict[Tuple[int, int], float] = defaultdict(lambda: -math.inf)
    beta[end] = 0.0
    for i, j, i2, j2, c in reversed(edges):
        s = beta[(i2, j2)] + logw[c]
        beta[(i, j)] = _logaddexp(beta[(i, j)], s)
    log_z = alpha[end]
    counts: Dict[Chunk, float] = defaultdict(float)
    if log_z == -math.inf:
        return log_z, counts
    for i, j, i2, j2, c in edges:
        lp = alpha[(i, j)] + logw[c] + beta[(i2, j2)] - log_z
        if lp > -745.0:
            counts[c] += math.exp(lp)
    return log_z, counts


def merge_counts(parts: Iterable[Dict[Chunk, float]]) -> Dict[Chunk, float]:
    """Sum per-worker expected-count maps (order does not matter)."""
    total: Dict[Chunk, float] = defaultdict(float)
    for part in parts:
        for c, v in part.items():
            total[c] += v
    return dict(total)


def em_train(
    pairs: Sequence[Pair],
    max_g: int = DEFAULT_MAX_G,
    max_p: int = DEFAULT_MAX_P,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    length_penalty: float = DEFAULT_LENGTH_PENALTY,
) -> AlignmentModel:
    """Fit chunk-pair probabilities by EM over the monotone alignment lattice.

    Pairs with no valid segmentation under the chunk bounds are skipped with a
    warning; their indices are kept in ``model.skipped``. Training stops when
    the corpus log-likelihood improves by less than ``tol`` or after
    ``max_iters`` E-steps. ``model.log_likelihoods`` holds one value per E-step.

    Raises:
        NoAlignablePairs: every pair was skipped.
    """
    if max_g < 1 or max_p < 1:
        raise ValueError("chunk bounds must be >= 1")
    prepared = []
    skipped = []
    for n, (g, p) in enumerate(pairs):
        p = tuple(p)
        edges = pair_edges(g, p, max_g, max_p) if is_alignable(g, p, max_g, max_p) else []
        if not edges:
            log.warning("pair %d (%s / %s) is not alignable within max_g=%d max_p=%d; skipped",
                        n, g, " ".join(p), max_g, max_p)
            skipped.append(n)
            continue
        prepared.append((edges, (len(g), len(p))))
    if not prepared:
        raise NoAlignablePairs("no pair is alignable under the chunk bounds")

    chunks = sorted({e[4] for edges, _ in prepared for e in edges})
    theta = {c: 1.0 / len(chunks) for c in chunks}
    weights = {c: chunk_weight(c, length_penalty) for c in chunks}
    history: List[float] = []
    for it in range(1, max_iters + 1):
        logw = {c: weights[c] * math.log(theta[c]) if theta.get(c, 0.0) > 0 else -math.inf
                for c in chunks}
        ll = 0.0
        parts = []
        for edges, end in prepared:
            log_z, counts = _expect(edges, end, logw)
            ll += log_z
            parts.append(counts)
        history.append(ll)
        log.info("iteration %d: log-likelihood %.9f", it, ll)

        counts = merge_counts(parts)
        # the exponent multiplies each occurrence's contribution to the Q function
        weighted = {c: v * weights[c] for c, v in counts.items() if v > 0.0}
        total = math.fsum(weighted.values())
        theta = {c: v / total for c, v in weighted.items() if v / total > 0.0}

        if len(history) > 1 and history[-1] - history[-2] < tol:
            break

    return AlignmentModel(
        chunk_prob=theta,
        max_g=max_g,
        max_p=max_p,
        length_penalty=length_penalty,
        log_likelihoods=history,
        skipped=skipped,
    )


def _better(cand, cur) -> bool:
    """Viterbi ordering: higher score, then more segments, then earliest boundaries."""
    if cur is None:
        return True
    cs, cn, cb = cand
    s, n, b = cur
    if abs(cs - s) > _TIE_EPS * max(1.0, abs(s)):
        return cs > s
    if cn != n:
        return cn > n
    return cb < b


def viterbi_align(model: AlignmentModel, pair: Pair) -> AlignedPair:
    """Best monotone segmentation of ``pair`` under ``model``.

    Raises:
        Unalignable: no segmentation uses only chunks known to the model.
    """
    g, p = pair[0], tuple(pair[1])
    G, P = len(g), len(p)
    if G == 0 or P == 0:
        raise Unalignable(f"empty side in pair {g!r} / {' '.join(p)!r}")
    best: Dict[Tuple[int, int], tuple] = {(0, 0): (0.0, 0, ())}
    for i in range(G):
        for j in range(P):
            cur = best.get((i, j))
            if cur is None:
                continue
            score, nseg, bounds = cur
            for a in range(1, min(model.max_g, G - i) + 1):
                gc = g[i : i + a]
                for b in range(1, min(model.max_p, P - j) + 1):
                    ls = model.log_score((gc, p[j : j + b]))
                    if ls == -math.inf:
                        continue
                    key = (i + a, j + b)
                    cand = (score + ls, nseg + 1, bounds + (key,))
                    if _better(cand, best.get(key)):
                        best[key] = cand
    final = best.get((G, P))
    if final is None:
        raise Unalignable(f"no segmentation of {g!r} / {' '.join(p)!r} under the model")
    segments = []
    prev = (0, 0)
    for i2, j2 in final[2]:
        segments.append((g[prev[0] : i2], p[prev[1] : j2]))
        prev = (i2, j2)
    return AlignedPair(tuple(segments), g, p)


def alignment_log_score(model: AlignmentModel, segments: Sequence[Chunk]) -> float:
    return sum(model.log_score(c) for c in segments)


def read_pairs(path: Union[str, Path]) -> List[Pair]:
    """Read ``grapheme<TAB>phoneme tokens`` lines.

    Raises:
        ValueError: a malformed line, with its 1-based line number.
    """
    pairs = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0].strip() or not cols[1].split():
            raise ValueError(f"{path}:{n}: expected 'grapheme<TAB>phonemes'")
        pairs.append((cols[0].strip(), tuple(cols[1].split())))
    return pairs


def align_corpus(model: AlignmentModel, pairs: Sequence[Pair]) -> Tuple[List[AlignedPair], List[int]]:
    """Viterbi-align every pair; returns (alignments, indices of unalignable pairs)."""
    out, bad = [], []
    for n, pair in enumerate(pairs):
        try:
            out.append(viterbi_align(model, pair))
        except Unalignable:
            bad.append(n)
    return out, bad
