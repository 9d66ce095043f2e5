"""Frame-level block identification.

The pipeline is: locate the taped construction area once on the first frame,
then per frame rectify, slice into cells and quadrants, classify quadrant
colors and combine them into a face label. Occlusion filtering and smoothing
run afterwards as sequential passes over the whole timeline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import imaging
from .core import BdtError, BlockFace, GridSpec, SpecMismatch, Timeline
from .imaging import HsvRange, OrientedRect, RawImage

Box = tuple[float, float, float, float]


class EmptyQuadrant(BdtError):
    pass


class GridNotFound(BdtError):
    pass


class NoInnerGreen(BdtError):
    pass


class QuadrantColor(enum.Enum):
    RED = "RedQ"
    WHITE = "WhiteQ"
    GREEN = "GreenQ"
    OTHER = "OtherQ"


# ---------------------------------------------------------------- color methods

@dataclass(frozen=True)
class RgbAveraging:
    threshold: float = 140

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError("threshold must be in [0, 255]")

    name = "rgb"


@dataclass(frozen=True)
class KMeans:
    k: int = 1
    threshold: float = 140
    max_iter: int = 50
    tol: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.threshold <= 255:
            raise ValueError("threshold must be in [0, 255]")

    name = "kmeans"


_KNN_LABELS = {"red": QuadrantColor.RED, "white": QuadrantColor.WHITE, "green": QuadrantColor.GREEN}


@dataclass(frozen=True, eq=False)
class Knn:
    """Nearest neighbours over concatenated per-channel histograms.

    ``training`` is a list of (label, image) with labels red/white/green;
    defaults to the simulator's noisy swatches.
    """

    k: int = 3
    bins: int = 8
    training: Sequence[tuple[str, RawImage]] | None = None
    _features: np.ndarray = field(init=False, repr=False)
    _labels: list = field(init=False, repr=False)

    name = "knn"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        training = self.training
        if training is None:
            from .simulator import knn_training_swatches

            training = knn_training_swatches()
        feats = np.stack([color_histogram(img, self.bins) for _, img in training])
        object.__setattr__(self, "_features", feats)
        object.__setattr__(self, "_labels", [_KNN_LABELS[label] for label, _ in training])

    def predict(self, quad: RawImage) -> QuadrantColor:
        d = np.linalg.norm(self._features - color_histogram(quad, self.bins), axis=1)
        nearest = np.argsort(d, kind="stable")[: self.k]
        votes: dict[QuadrantColor, list[float]] = {}
        for i in nearest:
            votes.setdefault(self._labels[i], []).append(float(d[i]))
        return min(votes, key=lambda c: (-len(votes[c]), sum(votes[c])))


ColorMethod = RgbAveraging | KMeans | Knn


def color_histogram(img: RawImage, bins: int) -> np.ndarray:
    px = np.asarray(img).reshape(-1, 3)
    hists = [np.histogram(px[:, ch], bins=bins, range=(0, 256))[0] / len(px) for ch in range(3)]
    return np.concatenate(hists)


def threshold_decision(rgb: Sequence[float], threshold: float) -> QuadrantColor:
    r, g, b = (v >= threshold for v in rgb)
    if r and g and b:
        return QuadrantColor.WHITE
    if r and not g and not b:
        return QuadrantColor.RED
    if g and not r and not b:
        return QuadrantColor.GREEN
    return QuadrantColor.OTHER


def _pixels(quad: RawImage) -> np.ndarray:
    px = np.asarray(quad, dtype=np.float64).reshape(-1, 3)
    if len(px) == 0:
        raise EmptyQuadrant("quadrant has no pixels")
    return px


def channel_means(px: np.ndarray) -> np.ndarray:
    return px.sum(axis=0) / len(px)


def _luminance(rgb: np.ndarray) -> np.ndarray:
    return rgb @ np.array([0.299, 0.587, 0.114])


def dominant_color(px: np.ndarray, k: int, max_iter: int = 50, tol: float = 0.5) -> np.ndarray:
    """Centroid of the largest Lloyd cluster; ties go to the darker centroid.

    Seeds are ``k`` evenly spaced pixels in row-major order.
    """
    n = len(px)
    k = min(k, n)
    centroids = px[[i * n // k for i in range(k)]].copy()
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d = ((px[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d, axis=1)
        moved = 0.0
        for j in range(k):
            members = px[assign == j]
            if len(members):
                new = channel_means(members)
                moved = max(moved, float(np.linalg.norm(new - centroids[j])))
                centroids[j] = new
        if moved < tol:
            break
    sizes = np.bincount(assign, minlength=k)
    lum = _luminance(centroids)
    best = min(range(k), key=lambda j: (-sizes[j], lum[j], j))
    return centroids[best]


def classify_quadrant(quad: RawImage, method: ColorMethod) -> QuadrantColor:
    if isinstance(method, Knn):
        _pixels(quad)
        return method.predict(quad)
    px = _pixels(quad)
    if isinstance(method, RgbAveraging):
        return threshold_decision(channel_means(px), method.threshold)
    if isinstance(method, KMeans):
        return threshold_decision(dominant_color(px, method.k, method.max_iter, method.tol), method.threshold)
    raise TypeError(f"unknown color method {method!r}")


# ---------------------------------------------------------------- face labeling

_R, _W, _G = QuadrantColor.RED, QuadrantColor.WHITE, QuadrantColor.GREEN


def face_from_quadrants(q1: QuadrantColor, q2: QuadrantColor, q3: QuadrantColor, q4: QuadrantColor) -> BlockFace:
    """Combine quadrant colors (TL, TR, BL, BR) into a face label."""
    quads = (q1, q2, q3, q4)
    if all(q == _G for q in quads):
        return BlockFace.EMPTY
    if all(q == _R for q in quads):
        return BlockFace.RED
    if all(q == _W for q in quads):
        return BlockFace.WHITE
    fired = [
        face
        for face, hit in (
            (BlockFace.NE, q2 == _R and q3 == _W),
            (BlockFace.SW, q3 == _R and q2 == _W),
            (BlockFace.NW, q1 == _R and q4 == _W),
            (BlockFace.SE, q4 == _R and q1 == _W),
        )
        if hit
    ]
    return fired[0] if len(fired) == 1 else BlockFace.INVALID


# ---------------------------------------------------------------- localization

@dataclass(frozen=True)
class DetectorConfig:
    blue: HsvRange = imaging.BLUE_RANGE
    green: HsvRange = imaging.GREEN_RANGE
    min_blue_area: int = 40


@dataclass(frozen=True)
class ConstructionArea:
    """Located construction area, cached for a whole trial.

    ``inner`` is the green crop (x0, y0, x1, y1) in rectified coordinates of
    ``rect``; ``grid_box`` is the blue outline's axis-aligned box in the
    original frame.
    """

    rect: OrientedRect
    inner: tuple[int, int, int, int]
    grid_box: tuple[int, int, int, int]

    def inner_box_in_image(self) -> Box:
        """Axis-aligned image-space box of the rotated inner crop."""
        W, H = round(self.rect.width), round(self.rect.height)
        x0, y0, x1, y1 = self.inner
        us = np.array([x0, x1, x1, x0]) - W / 2
        vs = np.array([y0, y0, y1, y1]) - H / 2
        xs, ys = self.rect.to_image(us, vs)
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())


def locate_construction_area(first_frame: RawImage, config: DetectorConfig | None = None) -> ConstructionArea:
    config = config or DetectorConfig()
    blue = imaging.largest_component_mask(imaging.mask_by_range(first_frame, config.blue))
    area = int(blue.sum())
    if area < config.min_blue_area:
        raise GridNotFound(f"largest blue region has {area} px (< {config.min_blue_area})")
    rows, cols = np.nonzero(blue)
    # hull of pixel corners only needs the leftmost/rightmost pixel per row
    edge = {}
    for r, c in zip(rows.tolist(), cols.tolist()):
        lo, hi = edge.get(r, (c, c))
        edge[r] = (min(lo, c), max(hi, c))
    boundary = [(r, c) for r, (lo, hi) in edge.items() for c in {lo, hi}]
    try:
        rect = imaging.min_area_rect(imaging.pixel_corners(boundary))
    except imaging.DegenerateGeometry as exc:
        raise GridNotFound(f"blue region is degenerate: {exc}") from None
    rect = _fit_rect(rect, first_frame.shape)
    upright = imaging.rectify(first_frame, rect)
    green = imaging.largest_component_mask(imaging.mask_by_range(upright, config.green))
    if not green.any():
        raise NoInnerGreen("no green area inside the blue outline")
    inner = _green_extent(green)
    box = (int(cols.min()), int(rows.min()), int(cols.max()) + 1, int(rows.max()) + 1)
    return ConstructionArea(rect, inner, box)


def _green_extent(green: np.ndarray) -> tuple[int, int, int, int]:
    """Crop box of rows/columns that are at least half as green as the fullest one.

    Interpolated pixels along the tape edge can pass the green range on their
    own; a majority rule keeps such single stray pixels from widening the crop.
    """
    cols, rows = green.sum(axis=0), green.sum(axis=1)
    xs = np.nonzero(cols * 2 >= cols.max())[0]
    ys = np.nonzero(rows * 2 >= rows.max())[0]
    return int(xs[0]), int(ys[0]), int(xs[-1]) + 1, int(ys[-1]) + 1


def _fit_rect(rect: OrientedRect, shape) -> OrientedRect:
    """Shrink by a pixel when the rotated raster would sample past the frame edge."""
    h, w = shape[:2]
    corners = rect.corners()
    if corners[:, 0].min() >= 0.5 and corners[:, 1].min() >= 0.5 and corners[:, 0].max() <= w - 0.5 and corners[:, 1].max() <= h - 0.5:
        return rect
    return OrientedRect(rect.center, max(rect.width - 1, 1), max(rect.height - 1, 1), rect.angle)


# ---------------------------------------------------------------- detection

class FrameDetector:
    """Classifies frames against a fixed construction area."""

    def __init__(self, area: ConstructionArea, spec: GridSpec, method: ColorMethod | None = None):
        self.area = area
        self.spec = spec
        self.method = method or RgbAveraging()
        x0, y0, x1, y1 = area.inner
        shape = (y1 - y0, x1 - x0)
        if shape[0] < 2 * spec.n or shape[1] < 2 * spec.n:
            raise imaging.TooSmall(f"inner crop {shape[1]}x{shape[0]} too small for n={spec.n}")
        plain = imaging.crop_origin(area.rect, (x0, y0)) is not None
        self._coords = None if plain else imaging.sample_coords(area.rect, shape, (x0, y0))

    def crop(self, frame: RawImage) -> RawImage:
        if self._coords is None:
            return imaging.rectify(frame, self.area.rect, self.area.inner)
        return imaging.bilinear(frame, *self._coords)

    def detect(self, frame: RawImage) -> np.ndarray:
        n = self.spec.n
        crop = self.crop(frame)
        if isinstance(self.method, RgbAveraging):
            return self._detect_means(crop)
        faces = np.empty((n, n), dtype=np.uint8)
        for r, row in enumerate(imaging.slice_grid(crop, n)):
            for c, quads in enumerate(row):
                faces[r, c] = face_from_quadrants(*(classify_quadrant(q, self.method) for q in quads))
        return faces

    def _detect_means(self, crop: RawImage) -> np.ndarray:
        # same decision as classify_quadrant(RgbAveraging), vectorized over quadrants
        n = self.spec.n
        h, w = crop.shape[:2]
        if h < 2 * n or w < 2 * n:
            raise imaging.TooSmall(f"{w}x{h} crop too small for n={n}")
        rows, cols = imaging.cell_bounds(h, w, n)
        rb = sorted({b for r in range(n) for b in (rows[r], rows[r] + (rows[r + 1] - rows[r]) // 2)} | {h})
        cb = sorted({b for c in range(n) for b in (cols[c], cols[c] + (cols[c + 1] - cols[c]) // 2)} | {w})
        sums = np.add.reduceat(np.add.reduceat(crop.astype(np.float64), rb[:-1], axis=0), cb[:-1], axis=1)
        counts = np.outer(np.diff(rb), np.diff(cb))[..., None]
        means = sums / counts
        thr = self.method.threshold
        hi = means >= thr
        white = hi.all(axis=2)
        red = hi[..., 0] & ~hi[..., 1] & ~hi[..., 2]
        green = hi[..., 1] & ~hi[..., 0] & ~hi[..., 2]
        colors = np.full(white.shape, 3, dtype=np.int64)  # R=0 W=1 G=2 O=3
        colors[red] = 0
        colors[white] = 1
        colors[green] = 2
        return _FACE_TABLE[colors[0::2, 0::2], colors[0::2, 1::2], colors[1::2, 0::2], colors[1::2, 1::2]]


_CODE_COLORS = (QuadrantColor.RED, QuadrantColor.WHITE, QuadrantColor.GREEN, QuadrantColor.OTHER)
_FACE_TABLE = np.array(
    [[[[face_from_quadrants(a, b, c, d) for d in _CODE_COLORS] for c in _CODE_COLORS] for b in _CODE_COLORS] for a in _CODE_COLORS],
    dtype=np.uint8,
)


def detect_frame(frame: RawImage, area: ConstructionArea, spec: GridSpec, method: ColorMethod | None = None) -> np.ndarray:
    """Faces of one frame as an ``(n, n)`` code array."""
    return FrameDetector(area, spec, method).detect(frame)


def detect_frames(frames: Iterable[RawImage], spec: GridSpec, method: ColorMethod | None = None,
                  config: DetectorConfig | None = None, area: ConstructionArea | None = None) -> tuple[Timeline, ConstructionArea]:
    """Dense timeline for a frame sequence; locates the area on the first frame if not given."""
    faces = []
    detector = None
    for frame in frames:
        if detector is None:
            area = area or locate_construction_area(frame, config)
            detector = FrameDetector(area, spec, method)
        faces.append(detector.detect(frame))
    if detector is None:
        raise GridNotFound("no frames")
    return Timeline(spec, np.arange(len(faces)), np.stack(faces)), area


# ---------------------------------------------------------------- occlusion

def iob(boxes: Sequence[Sequence[float]], grid_box: Sequence[float]) -> float:
    """Area of the union of ``boxes`` inside ``grid_box`` over the grid box area."""
    gx0, gy0, gx1, gy1 = grid_box
    area = (gx1 - gx0) * (gy1 - gy0)
    if area <= 0:
        raise ValueError("grid box must have positive area")
    clipped = []
    for x0, y0, x1, y1 in boxes:
        x0, y0, x1, y1 = max(x0, gx0), max(y0, gy0), min(x1, gx1), min(y1, gy1)
        if x0 < x1 and y0 < y1:
            clipped.append((x0, y0, x1, y1))
    if not clipped:
        return 0.0
    xs = sorted({b[0] for b in clipped} | {b[2] for b in clipped})
    covered = 0.0
    for xa, xb in zip(xs, xs[1:]):
        spans = sorted((b[1], b[3]) for b in clipped if b[0] <= xa and b[2] >= xb)
        length, cur_lo, cur_hi = 0.0, None, None
        for lo, hi in spans:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    length += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        if cur_hi is not None:
            length += cur_hi - cur_lo
        covered += length * (xb - xa)
    return min(1.0, covered / area)


def filter_occlusions(states: Timeline, hands: dict[int, Sequence[Sequence[float]]], grid_box: Sequence[float],
                      threshold: float = 0.3) -> Timeline:
    """Carry the previous output state forward over frames whose IoB exceeds ``threshold``."""
    faces = np.array(states.faces)
    for i in range(1, len(states)):
        if iob(hands.get(int(states.frames[i]), ()), grid_box) > threshold:
            faces[i] = faces[i - 1]
    return states.replace_faces(faces)


def normalize_intervals(intervals: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for a, b in sorted((min(a, b), max(a, b)) for a, b in intervals):
        if merged and a <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def filter_motion_intervals(states: Timeline, intervals: Iterable[tuple[int, int]]) -> Timeline:
    """Drop frames inside any closed interval; the result is marked sparse."""
    keep = np.ones(len(states), dtype=bool)
    for a, b in normalize_intervals(intervals):
        keep &= ~((states.frames >= a) & (states.frames <= b))
    return Timeline(states.spec, states.frames[keep], states.faces[keep], sparse=True)


# ---------------------------------------------------------------- smoothing

def smooth_track(track: Sequence[int]) -> np.ndarray:
    out = np.array(track, dtype=np.uint8)
    n = len(out)
    i = 0
    while i < n:
        if out[i] != BlockFace.INVALID:
            i += 1
            continue
        j = i
        while j < n and out[j] == BlockFace.INVALID:
            j += 1
        if i > 0 and j < n and out[i - 1] == out[j]:
            out[i:j] = out[i - 1]
        i = j
    return out


def smooth(states: Timeline) -> Timeline:
    """Rewrite Invalid runs bounded on both sides by the same label."""
    faces = np.array(states.faces)
    n = states.spec.n
    for r in range(n):
        for c in range(n):
            faces[:, r, c] = smooth_track(faces[:, r, c])
    return states.replace_faces(faces)


# ---------------------------------------------------------------- evaluation

def evaluate_accuracy(detected: Timeline, truth: Timeline) -> float:
    """Fraction of (frame, cell) pairs whose labels agree, over the detected frames."""
    if detected.spec.n != truth.spec.n:
        raise SpecMismatch(f"grid sizes differ: {detected.spec.n} vs {truth.spec.n}")
    if len(detected) == 0:
        raise SpecMismatch("detected timeline is empty")
    pos = np.searchsorted(truth.frames, detected.frames)
    ok = (pos < len(truth)) & (truth.frames[np.minimum(pos, len(truth) - 1)] == detected.frames)
    if not ok.all():
        missing = detected.frames[~ok][:5].tolist()
        raise SpecMismatch(f"truth lacks detected frames, e.g. {missing}")
    return float(np.mean(detected.faces == truth.faces[pos]))
