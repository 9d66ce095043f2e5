"""Low-level behavioural features of a single trial and across trials."""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .core import BdtError, BlockFace, CellPos, PlacementSequence, Timeline
from .strategy import derive_sequence


class TooFewPlacements(BdtError):
    pass


class DegenerateVariance(BdtError):
    pass


@dataclass(frozen=True)
class Correction:
    """A block label replaced by a different one, directly or via an empty cell."""

    frame: int
    cell: CellPos
    before: BlockFace
    after: BlockFace
    via_removal: bool = False


def _visible_track(timeline: Timeline, pos: CellPos):
    """(frame, face) pairs of one cell with Invalid frames skipped."""
    for frame, code in zip(timeline.frames.tolist(), timeline.track(pos).tolist()):
        if code != BlockFace.INVALID:
            yield frame, BlockFace(code)


def corrections(timeline: Timeline) -> list[Correction]:
    out = []
    for pos in timeline.spec.positions():
        current = None
        removed = None
        for frame, face in _visible_track(timeline, pos):
            if current is None or face == current:
                current = face
                continue
            if face == BlockFace.EMPTY:
                removed = current
            elif current == BlockFace.EMPTY:
                if removed is not None and removed != face:
                    out.append(Correction(frame, pos, removed, face, via_removal=True))
                removed = None
            else:
                out.append(Correction(frame, pos, current, face))
            current = face
    out.sort(key=lambda e: (e.frame, e.cell))
    return out


def count_errors(timeline: Timeline) -> tuple[int, list[Correction]]:
    events = corrections(timeline)
    return len(events), events


@dataclass(frozen=True)
class PlacementRun:
    cell: CellPos
    face: BlockFace
    start: int
    end: int  # inclusive

    @property
    def frames(self) -> int:
        return self.end - self.start + 1


def placement_durations(timeline: Timeline) -> list[PlacementRun]:
    """Maximal constant runs of block labels per cell."""
    runs = []
    frames = timeline.frames.tolist()
    for pos in timeline.spec.positions():
        track = timeline.track(pos).tolist()
        start = 0
        for i in range(1, len(track) + 1):
            if i == len(track) or track[i] != track[start]:
                face = BlockFace(track[start])
                if face.is_block:
                    runs.append(PlacementRun(pos, face, frames[start], frames[i - 1]))
                start = i
    return runs


@dataclass(frozen=True)
class Progression:
    distances: list[float]
    rightward: float
    leftward: float
    downward: float
    upward: float

    @property
    def mean_distance(self) -> float:
        return sum(self.distances) / len(self.distances)


def progression_and_distance(seq: PlacementSequence) -> Progression:
    order = seq.order()
    if len(order) < 2:
        raise TooFewPlacements(f"need at least 2 placed cells, got {len(order)}")
    steps = [(b.row - a.row, b.col - a.col) for a, b in zip(order, order[1:])]
    k = len(steps)
    return Progression(
        distances=[math.hypot(dr, dc) for dr, dc in steps],
        rightward=sum(dc > 0 for _, dc in steps) / k,
        leftward=sum(dc < 0 for _, dc in steps) / k,
        downward=sum(dr > 0 for dr, _ in steps) / k,
        upward=sum(dr < 0 for dr, _ in steps) / k,
    )


def default_swap_window(timeline: Timeline) -> int:
    return max(1, round(2 * timeline.spec.fps))


def detect_swaps(timeline: Timeline, window: int | None = None) -> tuple[int, int]:
    """(swaps, in-place changes) among the trial's corrections.

    Two corrections form a swap when they hit different cells at most
    ``window`` frames apart and exchange labels. Pairing is greedy from the
    earliest correction.
    """
    if window is None:
        window = default_swap_window(timeline)
    events = corrections(timeline)
    paired = [False] * len(events)
    swaps = 0
    for i, a in enumerate(events):
        if paired[i]:
            continue
        for j in range(i + 1, len(events)):
            b = events[j]
            if b.frame - a.frame > window:
                break
            if not paired[j] and b.cell != a.cell and b.before == a.after and b.after == a.before:
                paired[i] = paired[j] = True
                swaps += 1
                break
    return swaps, len(events) - 2 * swaps


def simultaneous_placements(seq: PlacementSequence) -> int:
    """Number of ranks shared by two or more cells."""
    ranks = [r for r in seq.ranks.reshape(-1).tolist() if r]
    return sum(1 for r in set(ranks) if ranks.count(r) > 1)


def completion_frame(timeline: Timeline) -> int:
    """Frame from which no cell changes its visible (non-Invalid) label again."""
    last = int(timeline.frames[0]) if len(timeline) else 0
    for pos in timeline.spec.positions():
        prev = None
        for frame, face in _visible_track(timeline, pos):
            if prev is not None and face != prev:
                last = max(last, frame)
            prev = face
    return last


@dataclass
class FeatureReport:
    error_count: int
    completion_frames: int
    completion_seconds: float
    per_cell_durations: list[PlacementRun]
    mean_consecutive_distance: float | None
    progression: dict[str, float] | None
    simultaneous_placements: int
    swaps: int
    in_place_changes: int
    errors: list[Correction] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_cell_durations"] = [
            {"cell": [r.cell.row, r.cell.col], "face": r.face.label, "start": r.start, "end": r.end}
            for r in self.per_cell_durations
        ]
        d["errors"] = [
            {"frame": e.frame, "cell": [e.cell.row, e.cell.col], "before": e.before.label,
             "after": e.after.label, "via_removal": e.via_removal}
            for e in self.errors
        ]
        return d


def extract_features(timeline: Timeline, swap_window: int | None = None) -> FeatureReport:
    count, events = count_errors(timeline)
    seq = derive_sequence(timeline)
    try:
        prog = progression_and_distance(seq)
        mean_dist = prog.mean_distance
        fractions = {k: getattr(prog, k) for k in ("rightward", "leftward", "downward", "upward")}
    except TooFewPlacements:
        mean_dist, fractions = None, None
    swaps, in_place = detect_swaps(timeline, swap_window)
    done = completion_frame(timeline)
    return FeatureReport(
        error_count=count,
        completion_frames=done,
        completion_seconds=timeline.spec.seconds(done),
        per_cell_durations=placement_durations(timeline),
        mean_consecutive_distance=mean_dist,
        progression=fractions,
        simultaneous_placements=simultaneous_placements(seq),
        swaps=swaps,
        in_place_changes=in_place,
        errors=events,
    )


@dataclass(frozen=True)
class TrialPoint:
    participant: str
    puzzle: str
    error_count: int
    completion_seconds: float

    def __post_init__(self):
        if self.completion_seconds <= 0:
            raise ValueError("completion_seconds must be positive")


def pearson(points: Sequence[TrialPoint]) -> float:
    """Sample correlation between completion time and error count."""
    if len(points) < 2:
        raise DegenerateVariance("need at least two points")
    xs = [p.completion_seconds for p in points]
    ys = [float(p.error_count) for p in points]
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError as exc:
        raise DegenerateVariance(str(exc)) from None
