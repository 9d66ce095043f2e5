"""Synthetic overhead renderer for block design trials.

A script lists block events and hand movements; rendering produces the
frames plus the exact timeline, hand boxes and grid geometry that a perfect
detector would report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .core import BdtError, BlockFace, CellPos, GridSpec, IncompleteSequence, PlacementSequence, Timeline

RGB = tuple[int, int, int]
Box = tuple[float, float, float, float]


class ScriptError(BdtError):
    """Invalid trial script; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class GeometryOverflow(ScriptError):
    pass


class EventOutOfBounds(ScriptError):
    pass


@dataclass(frozen=True)
class Palette:
    background: RGB = (40, 200, 60)
    tape: RGB = (30, 60, 180)
    red: RGB = (200, 30, 30)
    white: RGB = (230, 230, 230)
    hand: RGB = (200, 160, 120)


@dataclass(frozen=True)
class Geometry:
    center: tuple[float, float] = (320.0, 240.0)
    cell_px: int = 40
    tape_px: int = 8
    angle: float = 0.0


PRESETS = {
    "desk": Geometry(cell_px=40, tape_px=8),
    "paper-scale": Geometry(cell_px=7, tape_px=3),
}


@dataclass(frozen=True)
class Event:
    frame: int
    cell: CellPos
    face: BlockFace


@dataclass(frozen=True)
class HandMove:
    frame_start: int
    frame_end: int
    start: Box
    end: Box

    def box_at(self, frame: int) -> tuple[int, int, int, int] | None:
        if not self.frame_start <= frame <= self.frame_end:
            return None
        span = self.frame_end - self.frame_start
        t = 0.0 if span == 0 else (frame - self.frame_start) / span
        return tuple(round(a + (b - a) * t) for a, b in zip(self.start, self.end))


@dataclass(frozen=True)
class TrialScript:
    spec: GridSpec
    events: tuple[Event, ...] = ()
    hand_moves: tuple[HandMove, ...] = ()
    geometry: Geometry = field(default_factory=Geometry)
    palette: Palette = field(default_factory=Palette)
    noise_sigma: float = 0.0
    seed: int = 0
    n_frames: int | None = None
    supersample: int = 1

    @property
    def length(self) -> int:
        if self.n_frames is not None:
            return self.n_frames
        last = max([e.frame for e in self.events] + [h.frame_end for h in self.hand_moves] + [0])
        return last + 10

    def validate(self) -> None:
        spec, g = self.spec, self.geometry
        if g.cell_px < 6:
            raise ScriptError("geometry.cell_px", f"must be >= 6, got {g.cell_px}")
        if g.tape_px < 1:
            raise ScriptError("geometry.tape_px", "must be >= 1")
        if self.noise_sigma < 0:
            raise ScriptError("noise_sigma", "must be >= 0")
        if self.supersample < 1:
            raise ScriptError("supersample", "must be >= 1")
        if self.n_frames is not None and self.n_frames < 1:
            raise ScriptError("n_frames", "must be >= 1")
        x0, y0, x1, y1 = outer_box(self)
        if x0 < 1 or y0 < 1 or x1 > spec.image_width - 1 or y1 > spec.image_height - 1:
            raise GeometryOverflow("geometry", f"grid outline {x0:.1f},{y0:.1f},{x1:.1f},{y1:.1f} leaves the frame")
        last = -1
        for i, e in enumerate(self.events):
            if e.frame < last:
                raise ScriptError(f"events[{i}].frame", "events must be sorted by frame")
            last = e.frame
            if e.frame < 0 or e.frame >= self.length:
                raise EventOutOfBounds(f"events[{i}].frame", f"frame {e.frame} outside trial of {self.length}")
            if not (0 <= e.cell.row < spec.n and 0 <= e.cell.col < spec.n):
                raise EventOutOfBounds(f"events[{i}].cell", f"{tuple(e.cell)} outside {spec.n}x{spec.n} grid")
            if e.face == BlockFace.INVALID:
                raise ScriptError(f"events[{i}].face", "Invalid cannot be placed")
        for i, h in enumerate(self.hand_moves):
            if h.frame_end < h.frame_start:
                raise ScriptError(f"hand_moves[{i}]", "frame_end before frame_start")


@dataclass
class GroundTruth:
    timeline: Timeline
    hand_boxes: list[list[tuple[int, int, int, int]]]
    motion_intervals: list[tuple[int, int]]
    grid_box: Box
    tape_box: Box


def _rotated_bbox(script: TrialScript, half: float) -> Box:
    cx, cy = script.geometry.center
    a = math.radians(script.geometry.angle)
    ex = half * (abs(math.cos(a)) + abs(math.sin(a)))
    return (cx - ex, cy - ex, cx + ex, cy + ex)


def inner_half(script: TrialScript) -> float:
    return script.spec.n * script.geometry.cell_px / 2


def grid_box(script: TrialScript) -> Box:
    """Axis-aligned box of the cell area in image coordinates."""
    return _rotated_bbox(script, inner_half(script))


def outer_box(script: TrialScript) -> Box:
    return _rotated_bbox(script, inner_half(script) + script.geometry.tape_px)


# ---------------------------------------------------------------- noise

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, used to seed per-sample xorshift states."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def xorshift64star(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One xorshift64* step (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D). Returns (state, output)."""
    with np.errstate(over="ignore"):
        x = state ^ (state >> np.uint64(12))
        x = x ^ ((x << np.uint64(25)) & _MASK)
        x = x ^ (x >> np.uint64(27))
        return x, x * np.uint64(0x2545F4914F6CDD1D)


def gaussian_noise(seed: int, stream: int, count: int) -> np.ndarray:
    """``count`` standard normal samples for (seed, stream).

    Pair ``i`` gets its own xorshift64* state ``splitmix64(key + i) | 1`` where
    ``key = splitmix64(splitmix64(seed) ^ stream)``. One output is split into
    two 32-bit uniforms (high word -> radius, low word -> angle) and the
    Box-Muller pair fills samples ``2i`` (cosine) and ``2i + 1`` (sine).
    Being counter based, any sample can be reproduced without generating its
    predecessors, and streams vectorize.
    """
    pairs = (count + 1) // 2
    key = splitmix64(splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) ^ np.uint64(stream))
    with np.errstate(over="ignore"):
        state = splitmix64(key + np.arange(pairs, dtype=np.uint64)) | np.uint64(1)
    _, out = xorshift64star(state)
    u1 = ((out >> np.uint64(32)).astype(np.float64) + 1.0) * 2.0 ** -32  # (0, 1]
    u2 = (out & np.uint64(0xFFFFFFFF)).astype(np.float32) * np.float32(2.0 ** -32 * 2.0 * np.pi)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = radius * np.cos(u2)
    z[1::2] = radius * np.sin(u2)
    return z[:count]


# ---------------------------------------------------------------- rendering

_BG, _TAPE, _CELL = 0, 1, 2


class Renderer:
    """Renders frames of one script; geometry is computed once."""

    def __init__(self, script: TrialScript):
        script.validate()
        self.script = script
        spec, g = script.spec, script.geometry
        s = script.supersample
        h, w = spec.image_height, spec.image_width
        offs = (np.arange(s) + 0.5) / s
        ys = (np.arange(h)[:, None] + offs[None, :]).reshape(-1)
        xs = (np.arange(w)[:, None] + offs[None, :]).reshape(-1)
        xx, yy = np.meshgrid(xs, ys)  # (h*s, w*s)
        a = math.radians(g.angle)
        ca, sa = math.cos(a), math.sin(a)
        dx, dy = xx - g.center[0], yy - g.center[1]
        if g.angle == 0:
            u, v = dx, dy
        else:
            u, v = dx * ca + dy * sa, -dx * sa + dy * ca
        half = inner_half(script)
        outer = half + g.tape_px
        inner = (u >= -half) & (u < half) & (v >= -half) & (v < half)
        band = (u >= -outer) & (u < outer) & (v >= -outer) & (v < outer) & ~inner
        region = np.full(u.shape, _BG, dtype=np.uint8)
        region[band] = _TAPE
        region[inner] = _CELL
        cp = g.cell_px
        col = np.floor((u + half) / cp).astype(np.int64)
        row = np.floor((v + half) / cp).astype(np.int64)
        col = np.clip(col, 0, spec.n - 1)
        row = np.clip(row, 0, spec.n - 1)
        self._region = region
        self._cell_index = np.where(inner, row * spec.n + col, -1)
        # position inside the cell in cell-pixel units
        a_loc = (u + half) - col * cp
        b_loc = (v + half) - row * cp
        self._red_half = {
            BlockFace.NE: a_loc >= b_loc,
            BlockFace.SW: a_loc <= b_loc,
            BlockFace.NW: a_loc + b_loc <= cp,
            BlockFace.SE: a_loc + b_loc >= cp,
        }
        self._timeline = _truth_faces(script)
        self._hands = [_boxes_at(script, t) for t in range(script.length)]
        self._clean: dict[bytes, np.ndarray] = {}

    def face_colors(self, faces: np.ndarray) -> np.ndarray:
        """Noise-free float render (supersampled resolution) for a grid of faces."""
        p = self.script.palette
        img = np.empty(self._region.shape + (3,), dtype=np.float64)
        img[:] = p.background
        img[self._region == _TAPE] = p.tape
        flat = faces.reshape(-1)
        idx = self._cell_index
        inside = idx >= 0
        cell_face = np.full(idx.shape, BlockFace.EMPTY, dtype=np.uint8)
        cell_face[inside] = flat[idx[inside]]
        img[cell_face == BlockFace.RED] = p.red
        img[cell_face == BlockFace.WHITE] = p.white
        for face, red_side in self._red_half.items():
            sel = cell_face == face
            img[sel & red_side] = p.red
            img[sel & ~red_side] = p.white
        return img

    def render(self, frame: int) -> np.ndarray:
        script = self.script
        faces = self._timeline[frame]
        key = faces.tobytes()
        if key not in self._clean:
            self._clean[key] = self._downsample(self.face_colors(faces))
        img = self._clean[key].copy()
        for x0, y0, x1, y1 in self._hands[frame]:
            img[y0:y1, x0:x1] = script.palette.hand
        if script.noise_sigma > 0:
            img = img + script.noise_sigma * gaussian_noise(script.seed, frame, img.size).reshape(img.shape)
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)

    def _downsample(self, img: np.ndarray) -> np.ndarray:
        s = self.script.supersample
        if s == 1:
            return img
        h, w = self.script.spec.image_height, self.script.spec.image_width
        return img.reshape(h, s, w, s, 3).mean(axis=(1, 3))

    def frames(self) -> Iterator[np.ndarray]:
        for t in range(self.script.length):
            yield self.render(t)

    def truth(self) -> GroundTruth:
        script = self.script
        tl = Timeline(script.spec, np.arange(script.length), self._timeline)
        intervals = sorted({(h.frame_start, min(h.frame_end, script.length - 1)) for h in script.hand_moves})
        return GroundTruth(tl, self._hands, intervals, grid_box(script), outer_box(script))


def _truth_faces(script: TrialScript) -> np.ndarray:
    n = script.spec.n
    faces = np.zeros((script.length, n, n), dtype=np.uint8)
    for e in script.events:
        faces[e.frame:, e.cell.row, e.cell.col] = e.face
    return faces


def _boxes_at(script: TrialScript, frame: int) -> list[tuple[int, int, int, int]]:
    w, h = script.spec.image_width, script.spec.image_height
    out = []
    for move in script.hand_moves:
        box = move.box_at(frame)
        if box is None:
            continue
        x0, y0, x1, y1 = max(0, box[0]), max(0, box[1]), min(w, box[2]), min(h, box[3])
        if x0 < x1 and y0 < y1:
            out.append((x0, y0, x1, y1))
    return out


def render_trial(script: TrialScript) -> tuple[list[np.ndarray], GroundTruth]:
    r = Renderer(script)
    return list(r.frames()), r.truth()


# ---------------------------------------------------------------- script builders

def covering_hand(script: TrialScript, margin: float = 6.0) -> Box:
    x0, y0, x1, y1 = outer_box(script)
    return (x0 - margin, y0 - margin, x1 + margin, y1 + margin)


def scripted_strategy_trial(
    spec: GridSpec,
    design: Sequence[Sequence[BlockFace]],
    sequence: PlacementSequence,
    frames_per_move: int = 10,
    geometry: Geometry | None = None,
    hands: bool = True,
    sweep_frames: int = 0,
    **script_kw,
) -> TrialScript:
    """Script that places ``design[r][c]`` at frame ``rank * frames_per_move``.

    Each placement is preceded by a hand covering the whole construction area
    for the second half of the move interval. With ``sweep_frames`` > 0 the
    hand first slides in from the right over that many frames, so some frames
    see it only partly over the grid.
    """
    if not sequence.complete:
        raise IncompleteSequence("strategy trial needs every cell ranked")
    design = np.asarray([[BlockFace(f) for f in row] for row in design], dtype=np.uint8)
    if design.shape != (spec.n, spec.n):
        raise ValueError(f"design must be {spec.n}x{spec.n}")
    if np.any((design == BlockFace.EMPTY) | (design == BlockFace.INVALID)):
        raise ValueError("design targets must be blocks")
    if frames_per_move < 2:
        raise ValueError("frames_per_move must be >= 2")
    hold = max(1, frames_per_move // 2)
    if sweep_frames < 0 or hold + sweep_frames >= frames_per_move:
        raise ValueError("sweep_frames must leave at least one hand-free frame per move")
    events = sorted(
        (Event(int(sequence.ranks[p.row, p.col]) * frames_per_move, p, BlockFace(int(design[p.row, p.col])))
         for p in spec.positions()),
        key=lambda e: (e.frame, e.cell),
    )
    script = TrialScript(spec, tuple(events), geometry=geometry or Geometry(), **script_kw)
    if hands:
        box = covering_hand(script)
        width = box[2] - box[0]
        away = (box[0] + width, box[1], box[2] + width, box[3])
        moves = []
        for f in sorted({e.frame for e in events}):
            if sweep_frames:
                moves.append(HandMove(f - hold - sweep_frames, f - hold - 1, away, box))
            moves.append(HandMove(f - hold, f - 1, box, box))
        script = replace(script, hand_moves=tuple(moves))
    if script.n_frames is None:
        script = replace(script, n_frames=events[-1].frame + frames_per_move)
    return script


def knn_training_swatches(
    palette: Palette | None = None, count: int = 10, size: int = 8, sigma: float = 6.0, seed: int = 7
) -> list[tuple[str, np.ndarray]]:
    """Noisy uniform swatches of red, white and green (``count`` each)."""
    palette = palette or Palette()
    colors = {"red": palette.red, "white": palette.white, "green": palette.background}
    out = []
    stream = 0
    for name, rgb in colors.items():
        for _ in range(count):
            base = np.broadcast_to(np.array(rgb, dtype=np.float64), (size, size, 3))
            noisy = base + sigma * gaussian_noise(seed, 1_000_000 + stream, base.size).reshape(base.shape)
            out.append((name, np.clip(np.rint(noisy), 0, 255).astype(np.uint8)))
            stream += 1
    return out
