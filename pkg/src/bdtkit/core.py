"""Domain types shared across the toolkit.

Grids are stored as small integer arrays of ``BlockFace`` codes so that whole
timelines fit in a single ``(frames, n, n)`` numpy array.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np


class BdtError(Exception):
    """Base class for all toolkit errors."""


class IncompleteSequence(BdtError):
    pass


class SpecMismatch(BdtError):
    pass


class BlockFace(enum.IntEnum):
    """Visible top face of a cell. Diagonal labels name where the red half points."""

    EMPTY = 0
    RED = 1
    WHITE = 2
    NW = 3
    NE = 4
    SW = 5
    SE = 6
    INVALID = 7

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "BlockFace":
        try:
            return _BY_LABEL[text]
        except KeyError:
            raise ValueError(f"unknown block face label {text!r}") from None

    @property
    def is_block(self) -> bool:
        """True for faces that are an actual placed block."""
        return self not in (BlockFace.EMPTY, BlockFace.INVALID)

    def __str__(self) -> str:
        return self.label


_LABELS = {
    BlockFace.EMPTY: "Empty",
    BlockFace.RED: "Red",
    BlockFace.WHITE: "White",
    BlockFace.NW: "NW",
    BlockFace.NE: "NE",
    BlockFace.SW: "SW",
    BlockFace.SE: "SE",
    BlockFace.INVALID: "Invalid",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}
LABELS = tuple(_LABELS[f] for f in BlockFace)


class TransitionKind(enum.Enum):
    NO_CHANGE = "NoChange"
    PLACEMENT = "Placement"
    REMOVAL = "Removal"
    MODIFICATION = "Modification"
    INVALID_INVOLVED = "InvalidInvolved"


def face_transition_kind(before: BlockFace, after: BlockFace) -> TransitionKind:
    if before == after:
        return TransitionKind.NO_CHANGE
    if before == BlockFace.INVALID or after == BlockFace.INVALID:
        return TransitionKind.INVALID_INVOLVED
    if before == BlockFace.EMPTY:
        return TransitionKind.PLACEMENT
    if after == BlockFace.EMPTY:
        return TransitionKind.REMOVAL
    return TransitionKind.MODIFICATION


@dataclass(frozen=True)
class GridSpec:
    n: int
    fps: Fraction = Fraction(10)
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid side must be at least 2")
        object.__setattr__(self, "fps", Fraction(self.fps))
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def cells(self) -> int:
        return self.n * self.n

    def seconds(self, frames: int) -> float:
        return float(Fraction(frames) / self.fps)

    def positions(self) -> Iterator["CellPos"]:
        """All cells in row-major order."""
        for r in range(self.n):
            for c in range(self.n):
                yield CellPos(r, c)


@dataclass(frozen=True, order=True)
class CellPos:
    row: int
    col: int

    def index(self, n: int) -> int:
        return self.row * n + self.col

    def __iter__(self):
        return iter((self.row, self.col))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridState:
    frame_index: int
    faces: np.ndarray  # (n, n) of BlockFace codes

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=np.uint8)
        if faces.ndim != 2 or faces.shape[0] != faces.shape[1]:
            raise ValueError(f"faces must be square, got shape {faces.shape}")
        object.__setattr__(self, "faces", _frozen(faces))

    def face(self, pos: CellPos) -> BlockFace:
        return BlockFace(int(self.faces[pos.row, pos.col]))

    def __eq__(self, other):
        if not isinstance(other, GridState):
            return NotImplemented
        return self.frame_index == other.frame_index and np.array_equal(self.faces, other.faces)


@dataclass(frozen=True, eq=False)
class Timeline:
    """Per-frame grid states of one trial.

    ``faces`` has shape ``(len(frames), n, n)``. Unless ``sparse`` is set, the
    frame indices must be exactly ``0..len-1``.
    """

    spec: GridSpec
    frames: np.ndarray
    faces: np.ndarray
    sparse: bool = False

    def __post_init__(self):
        n = self.spec.n
        frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        faces = np.asarray(self.faces, dtype=np.uint8).reshape(len(frames), n, n)
        if len(frames) > 1 and np.any(np.diff(frames) <= 0):
            raise ValueError("timeline frames must be strictly increasing")
        if len(frames) and frames[0] < 0:
            raise ValueError("frame indices must be non-negative")
        if not self.sparse and not np.array_equal(frames, np.arange(len(frames))):
            raise ValueError("dense timeline must be contiguous from frame 0")
        if faces.size and faces.max() > BlockFace.INVALID:
            raise ValueError("unknown face code in timeline")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "faces", _frozen(faces))

    @classmethod
    def from_states(cls, spec: GridSpec, states: Sequence[GridState], sparse: bool = False) -> "Timeline":
        frames = [s.frame_index for s in states]
        faces = np.stack([s.faces for s in states]) if states else np.zeros((0, spec.n, spec.n))
        return cls(spec, np.array(frames), faces, sparse=sparse)

    @classmethod
    def from_labels(cls, spec: GridSpec, grids: Sequence[Sequence[Sequence[BlockFace | str]]]) -> "Timeline":
        """Dense timeline from nested per-frame label grids (strings or faces)."""
        codes = [
            [[BlockFace.parse(f) if isinstance(f, str) else BlockFace(f) for f in row] for row in grid]
            for grid in grids
        ]
        return cls(spec, np.arange(len(codes)), np.array(codes, dtype=np.uint8).reshape(-1, spec.n, spec.n))

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[GridState]:
        return iter(self.states)

    def __eq__(self, other):
        if not isinstance(other, Timeline):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.sparse == other.sparse
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.faces, other.faces)
        )

    @property
    def states(self) -> list[GridState]:
        return [GridState(int(f), g) for f, g in zip(self.frames, self.faces)]

    def track(self, pos: CellPos) -> np.ndarray:
        """Face codes of a single cell across all frames."""
        return self.faces[:, pos.row, pos.col]

    def replace_faces(self, faces: np.ndarray) -> "Timeline":
        return Timeline(self.spec, self.frames, faces, sparse=self.sparse)


UNPLACED = 0


@dataclass(frozen=True, eq=False)
class PlacementSequence:
    """Rank of the first placement in every cell; ``UNPLACED`` (0) marks untouched cells."""

    spec: GridSpec
    ranks: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.spec.n
        ranks = np.asarray(self.ranks, dtype=np.int64).reshape(n, n)
        if ranks.min(initial=0) < 0:
            raise ValueError("ranks must be >= 1 or UNPLACED")
        placed = np.sort(ranks[ranks != UNPLACED])
        # competition ranking: each rank equals 1 + number of strictly smaller ranks
        expected = np.searchsorted(placed, placed, side="left") + 1
        if not np.array_equal(placed, expected):
            raise ValueError(f"ranks are not a competition ranking: {placed.tolist()}")
        object.__setattr__(self, "ranks", _frozen(ranks))

    @classmethod
    def from_order(cls, spec: GridSpec, order: Sequence[CellPos | tuple[int, int]]) -> "PlacementSequence":
        """Tie-free sequence placing ``order[i]`` at rank ``i + 1``."""
        ranks = np.zeros((spec.n, spec.n), dtype=np.int64)
        for i, (r, c) in enumerate(order):
            if ranks[r, c]:
                raise ValueError(f"cell {(r, c)} appears twice")
            ranks[r, c] = i + 1
        return cls(spec, ranks)

    @classmethod
    def from_vector(cls, spec: GridSpec, ranks: Sequence[int]) -> "PlacementSequence":
        return cls(spec, np.asarray(ranks).reshape(spec.n, spec.n))

    @property
    def complete(self) -> bool:
        return bool(np.all(self.ranks != UNPLACED))

    def rank(self, pos: CellPos) -> int | None:
        r = int(self.ranks[pos.row, pos.col])
        return None if r == UNPLACED else r

    def order(self) -> list[CellPos]:
        """Placed cells sorted by rank, ties in row-major order."""
        flat = self.ranks.reshape(-1)
        idx = [i for i in np.argsort(flat, kind="stable") if flat[i] != UNPLACED]
        n = self.spec.n
        return [CellPos(int(i) // n, int(i) % n) for i in idx]

    def __eq__(self, other):
        if not isinstance(other, PlacementSequence):
            return NotImplemented
        return self.spec.n == other.spec.n and np.array_equal(self.ranks, other.ranks)


def rank_vector(seq: PlacementSequence) -> list[int]:
    """Flatten a complete sequence in row-major order."""
    if not seq.complete:
        missing = [tuple(p) for p in seq.spec.positions() if seq.rank(p) is None]
        raise IncompleteSequence(f"unplaced cells: {missing}")
    return [int(r) for r in seq.ranks.reshape(-1)]
