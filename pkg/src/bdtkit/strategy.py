"""Placement sequences, strategy sample sets and similarity scoring."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .core import BdtError, BlockFace, CellPos, GridSpec, PlacementSequence, Timeline, rank_vector


class UnsupportedSpec(BdtError):
    pass


class LengthMismatch(BdtError):
    pass


class AllTied(BdtError):
    pass


class StrategyKind(enum.Enum):
    ROW_BY_ROW = "r-r"
    COL_BY_COL = "c-c"
    SUB_SECTION = "s-s"
    PERIMETER_COMPLETE = "p-c"
    VERTICES_FIRST = "v-f"

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    StrategyKind.ROW_BY_ROW: "row-by-row",
    StrategyKind.COL_BY_COL: "column-by-column",
    StrategyKind.SUB_SECTION: "sub-section",
    StrategyKind.PERIMETER_COMPLETE: "perimeter-complete",
    StrategyKind.VERTICES_FIRST: "vertices-first",
}

KIND_ORDER = tuple(StrategyKind)


class Measure(enum.Enum):
    EUCLID = "euclid"
    TAU = "tau"


# ---------------------------------------------------------------- sequences

def derive_sequence(timeline: Timeline) -> PlacementSequence:
    """Rank cells by the frame of their first block label (competition ranking)."""
    n = timeline.spec.n
    faces = timeline.faces
    placed = (faces != BlockFace.EMPTY) & (faces != BlockFace.INVALID)
    first = np.full((n, n), -1, dtype=np.int64)
    any_placed = placed.any(axis=0)
    first[any_placed] = timeline.frames[placed.argmax(axis=0)[any_placed]]
    values = np.sort(first[any_placed])
    ranks = np.zeros((n, n), dtype=np.int64)
    ranks[any_placed] = np.searchsorted(values, first[any_placed], side="left") + 1
    return PlacementSequence(timeline.spec, ranks)


# ---------------------------------------------------------------- sample sets

@dataclass(frozen=True, eq=False)
class SampleSet:
    kind: StrategyKind
    spec: GridSpec
    vectors: np.ndarray  # (m, n*n) row-major rank vectors

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def sequences(self) -> list[PlacementSequence]:
        return [PlacementSequence.from_vector(self.spec, v) for v in self.vectors]

    def __contains__(self, seq: PlacementSequence) -> bool:
        v = np.asarray(rank_vector(seq))
        return bool(np.any(np.all(self.vectors == v, axis=1)))


def perimeter_cycle(n: int) -> list[CellPos]:
    """Perimeter cells clockwise from the top-left corner."""
    top = [CellPos(0, c) for c in range(n)]
    right = [CellPos(r, n - 1) for r in range(1, n)]
    bottom = [CellPos(n - 1, c) for c in range(n - 2, -1, -1)]
    left = [CellPos(r, 0) for r in range(n - 2, 0, -1)]
    return top + right + bottom + left


def corners(n: int) -> list[CellPos]:
    return [CellPos(0, 0), CellPos(0, n - 1), CellPos(n - 1, 0), CellPos(n - 1, n - 1)]


def _row_by_row(n):
    for rows in itertools.permutations(range(n)):
        for cols in itertools.permutations(range(n)):
            yield [CellPos(r, c) for r in rows for c in cols]


def _col_by_col(n):
    for cols in itertools.permutations(range(n)):
        for rows in itertools.permutations(range(n)):
            yield [CellPos(r, c) for c in cols for r in rows]


def _sub_section(n):
    if n != 4:
        raise UnsupportedSpec(f"sub-section strategy needs a 4x4 grid, got {n}x{n}")
    origins = [(0, 0), (0, 2), (2, 0), (2, 2)]
    local = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for sections in itertools.permutations(origins):
        for cells in itertools.permutations(local):
            yield [CellPos(r0 + dr, c0 + dc) for r0, c0 in sections for dr, dc in cells]


def _perimeter_complete(n):
    cycle = perimeter_cycle(n)
    inner = [CellPos(r, c) for r in range(1, n - 1) for c in range(1, n - 1)]
    for start in range(len(cycle)):
        for step in (1, -1):
            ring = [cycle[(start + step * i) % len(cycle)] for i in range(len(cycle))]
            for order in itertools.permutations(inner):
                yield ring + list(order)


def _vertices_first(n):
    vertex = corners(n)
    skip = set(vertex)
    for first in itertools.permutations(vertex):
        for rows in itertools.permutations(range(n)):
            rest = [CellPos(r, c) for r in rows for c in range(n) if CellPos(r, c) not in skip]
            yield list(first) + rest


_GENERATORS = {
    StrategyKind.ROW_BY_ROW: _row_by_row,
    StrategyKind.COL_BY_COL: _col_by_col,
    StrategyKind.SUB_SECTION: _sub_section,
    StrategyKind.PERIMETER_COMPLETE: _perimeter_complete,
    StrategyKind.VERTICES_FIRST: _vertices_first,
}


@lru_cache(maxsize=None)
def _vectors(kind: StrategyKind, n: int) -> np.ndarray:
    if n not in (3, 4):
        raise UnsupportedSpec(f"sample sets are defined for 3x3 and 4x4 grids, got {n}x{n}")
    rows = []
    for order in _GENERATORS[kind](n):
        ranks = np.empty(n * n, dtype=np.int64)
        for i, p in enumerate(order):
            ranks[p.row * n + p.col] = i + 1
        rows.append(ranks)
    vectors = np.unique(np.array(rows), axis=0)
    vectors.setflags(write=False)
    return vectors


def generate_sample_set(kind: StrategyKind, spec: GridSpec) -> SampleSet:
    return SampleSet(kind, spec, _vectors(kind, spec.n))


def all_sample_sets(spec: GridSpec) -> dict[StrategyKind, SampleSet]:
    """Every kind defined for this grid size, in canonical kind order."""
    sets = {}
    for kind in KIND_ORDER:
        try:
            sets[kind] = generate_sample_set(kind, spec)
        except UnsupportedSpec:
            if kind is not StrategyKind.SUB_SECTION:
                raise
    return sets


# ---------------------------------------------------------------- similarity

def _check_lengths(x, y):
    if len(x) != len(y):
        raise LengthMismatch(f"lists of length {len(x)} and {len(y)}")


def euclid_similarity(x: Sequence[float], y: Sequence[float]) -> float:
    """1 / (1 + Euclidean distance)."""
    _check_lengths(x, y)
    return 1.0 / (1.0 + math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y))))


def _pair_signs(v: np.ndarray) -> np.ndarray:
    """sign(v[j] - v[i]) for all i < j, along the last axis."""
    m = v.shape[-1]
    i, j = np.triu_indices(m, k=1)
    return np.sign(v[..., j] - v[..., i]).astype(np.int8)


def tau_counts(x: Sequence[float], y: Sequence[float]) -> tuple[int, int, int, int]:
    """(P, Q, T, U): concordant, discordant, tied only in x, tied only in y."""
    _check_lengths(x, y)
    sx = _pair_signs(np.asarray(x, dtype=np.float64))
    sy = _pair_signs(np.asarray(y, dtype=np.float64))
    prod = sx.astype(np.int64) * sy
    return int((prod > 0).sum()), int((prod < 0).sum()), int(((sx == 0) & (sy != 0)).sum()), int(((sx != 0) & (sy == 0)).sum())


def _tau(p_minus_q, pq, t, u):
    denom = (pq + t) * (pq + u)
    if denom == 0:
        raise AllTied("no untied pairs in at least one list")
    return p_minus_q / math.sqrt(denom)


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tau-b rank correlation; pairs tied in both lists count nowhere."""
    p, q, t, u = tau_counts(x, y)
    return _tau(p - q, p + q, t, u)


# ---------------------------------------------------------------- classification

@dataclass(frozen=True)
class StrategyReport:
    measure: Measure
    scores: dict[StrategyKind, float]
    best_kind: StrategyKind
    tie_flag: bool
    cardinalities: dict[StrategyKind, int]

    def to_dict(self) -> dict:
        return {
            "measure": self.measure.value,
            "scores": {k.value: round(v, 6) for k, v in self.scores.items()},
            "best_kind": self.best_kind.value,
            "tie_flag": self.tie_flag,
            "cardinalities": {k.value: self.cardinalities.get(k, 0) for k in KIND_ORDER},
        }


TIE_TOLERANCE = 1e-9


def set_scores(x: Sequence[int], sample: SampleSet, measure: Measure = Measure.TAU) -> np.ndarray:
    """Similarity of ``x`` against every member of ``sample``."""
    xv = np.asarray(x, dtype=np.int64)
    vectors = sample.vectors
    _check_lengths(xv, vectors[0])
    if measure is Measure.EUCLID:
        d2 = ((vectors - xv) ** 2).sum(axis=1)
        return np.array([1.0 / (1.0 + math.sqrt(int(v))) for v in d2])
    sx = _pair_signs(xv).astype(np.int64)
    sy = _pair_signs(vectors).astype(np.int64)
    p_minus_q = sy @ sx
    nx, ny = (sx != 0).astype(np.int64), (sy != 0).astype(np.int64)
    pq = ny @ nx
    t = ny @ (1 - nx)
    u = (1 - ny) @ nx
    return np.array([_tau(int(a), int(b), int(c), int(d)) for a, b, c, d in zip(p_minus_q, pq, t, u)])


def classify(
    seq: PlacementSequence,
    sets: dict[StrategyKind, SampleSet] | Iterable[SampleSet] | None = None,
    measure: Measure = Measure.TAU,
) -> StrategyReport:
    """Best similarity per strategy kind and the most likely kind."""
    x = rank_vector(seq)
    if sets is None:
        sets = all_sample_sets(seq.spec)
    if not isinstance(sets, dict):
        sets = {s.kind: s for s in sets}
    scores = {k: float(set_scores(x, sets[k], measure).max()) for k in KIND_ORDER if k in sets}
    if not scores:
        raise ValueError("no sample sets to compare against")
    top = max(scores.values())
    leaders = [k for k in scores if top - scores[k] < TIE_TOLERANCE]
    return StrategyReport(measure, scores, leaders[0], len(leaders) > 1, {k: len(s) for k, s in sets.items()})
