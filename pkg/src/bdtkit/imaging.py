"""Raster primitives.

Images are ``(height, width, 3)`` uint8 numpy arrays. Continuous pixel
coordinates put pixel ``(row i, col j)`` on the square ``[j, j+1) x [i, i+1)``,
so its center is ``(j + 0.5, i + 0.5)``.
"""

from __future__ import annotations

import colorsys
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import BdtError

RawImage = np.ndarray


class MalformedPpm(BdtError):
    pass


class DegenerateGeometry(BdtError):
    pass


class OutOfBounds(BdtError):
    pass


class TooSmall(BdtError):
    pass


# ---------------------------------------------------------------- PPM I/O

_HEADER = re.compile(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s")


def load_ppm(path) -> RawImage:
    data = Path(path).read_bytes()
    if data[:2] != b"P6":
        raise MalformedPpm(f"{path}: bad magic {data[:2]!r}")
    m = _HEADER.match(data)
    if not m:
        raise MalformedPpm(f"{path}: unreadable header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise MalformedPpm(f"{path}: maxval {maxval} != 255")
    payload = data[m.end():]
    need = width * height * 3
    if len(payload) < need:
        raise MalformedPpm(f"{path}: truncated payload ({len(payload)} of {need} bytes)")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(height, width, 3).copy()


def save_ppm(img: RawImage, path) -> None:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


# ---------------------------------------------------------------- color

def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone HSV with hue in degrees ``[0, 360)`` and s, v in ``[0, 1]``."""
    h, s, v = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    return (h * 360.0) % 360.0, s, v


def hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb((h % 360.0) / 360.0, s, v)
    return round(r * 255), round(g * 255), round(b * 255)


def rgb_to_hsv_array(img: RawImage) -> np.ndarray:
    """Vectorized hexcone conversion; returns float ``(..., 3)`` of (h, s, v)."""
    rgb = np.asarray(img, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        mx == r,
        ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h * 60.0, 0.0) % 360.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


@dataclass(frozen=True)
class HsvRange:
    h_min: float
    h_max: float
    s_min: float = 0.0
    s_max: float = 1.0
    v_min: float = 0.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.s_min > self.s_max or self.v_min > self.v_max:
            raise ValueError("HSV range needs min <= max for s and v")

    def hue_contains(self, h: np.ndarray) -> np.ndarray:
        if self.h_min <= self.h_max:
            return (h >= self.h_min) & (h <= self.h_max)
        return (h >= self.h_min) | (h <= self.h_max)


BLUE_RANGE = HsvRange(200, 260, s_min=0.40, v_min=0.20)
GREEN_RANGE = HsvRange(90, 150, s_min=0.30, v_min=0.15)


def mask_by_range(img: RawImage, rng: HsvRange) -> np.ndarray:
    hsv = rgb_to_hsv_array(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    return (
        rng.hue_contains(h)
        & (s >= rng.s_min) & (s <= rng.s_max)
        & (v >= rng.v_min) & (v <= rng.v_max)
    )


# ---------------------------------------------------------------- components

def largest_component(mask: np.ndarray) -> set[tuple[int, int]]:
    """Largest 4-connected region as a set of (row, col).

    Equal sizes are broken by the lexicographically smallest member pixel.
    """
    labels, count = ndimage.label(np.asarray(mask, dtype=bool))
    if count == 0:
        return set()
    return {(int(r), int(c)) for r, c in zip(*np.nonzero(labels == _largest_label(labels, count)))}


def largest_component_mask(mask: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(np.asarray(mask, dtype=bool))
    if count == 0:
        return np.zeros(np.shape(mask), dtype=bool)
    return labels == _largest_label(labels, count)


def _largest_label(labels: np.ndarray, count: int) -> int:
    flat = labels.reshape(-1)
    sizes = np.bincount(flat, minlength=count + 1)
    sizes[0] = 0
    ids, first = np.unique(flat, return_index=True)
    first_at = dict(zip(ids.tolist(), first.tolist()))
    best = max(range(1, count + 1), key=lambda k: (sizes[k], -first_at[k]))
    return best


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class OrientedRect:
    """Rectangle whose width axis points along ``(cos angle, sin angle)`` in image coords."""

    center: tuple[float, float]
    width: float
    height: float
    angle: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rectangle dimensions must be positive")

    def corners(self) -> np.ndarray:
        a = math.radians(self.angle)
        ux = np.array([math.cos(a), math.sin(a)])
        uy = np.array([-math.sin(a), math.cos(a)])
        c = np.array(self.center)
        hw, hh = self.width / 2, self.height / 2
        return np.array([c - hw * ux - hh * uy, c + hw * ux - hh * uy, c + hw * ux + hh * uy, c - hw * ux + hh * uy])

    def to_image(self, u, v):
        """Map rect-local offsets (along width, along height) from the center to image coords."""
        a = math.radians(self.angle)
        ca, sa = math.cos(a), math.sin(a)
        cx, cy = self.center
        return cx + u * ca - v * sa, cy + u * sa + v * ca


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _normalize_angle(angle: float, w: float, h: float) -> tuple[float, float, float]:
    # rotating the frame by 90 degrees swaps which side is the width
    while angle > 45.0:
        angle -= 90.0
        w, h = h, w
    while angle <= -45.0:
        angle += 90.0
        w, h = h, w
    return angle, w, h


def min_area_rect(points) -> OrientedRect:
    """Minimum-area enclosing rectangle using rotating calipers on the hull edges."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    hull = convex_hull(pts) if len(pts) >= 3 else pts
    if len(hull) < 3:
        raise DegenerateGeometry("need at least 3 non-collinear points")
    best = None
    for i in range(len(hull)):
        edge = hull[(i + 1) % len(hull)] - hull[i]
        length = math.hypot(*edge)
        if length == 0:
            continue
        ux = edge / length
        uy = np.array([-ux[1], ux[0]])
        pu, pv = hull @ ux, hull @ uy
        w, h = pu.max() - pu.min(), pv.max() - pv.min()
        area = w * h
        if best is None or area < best[0] - 1e-9:
            mid_u, mid_v = (pu.max() + pu.min()) / 2, (pv.max() + pv.min()) / 2
            center = mid_u * ux + mid_v * uy
            best = (area, center, w, h, math.degrees(math.atan2(ux[1], ux[0])))
    _, center, w, h, angle = best
    angle, w, h = _normalize_angle(angle, w, h)
    if abs(angle) < 1e-9:
        angle = 0.0
    return OrientedRect((float(center[0]), float(center[1])), float(w), float(h), float(angle))


def pixel_corners(pixels) -> np.ndarray:
    """Continuous (x, y) corners of every pixel in a set of (row, col)."""
    rc = np.asarray(sorted(pixels), dtype=float).reshape(-1, 2)
    x, y = rc[:, 1], rc[:, 0]
    return np.concatenate([np.stack([x + dx, y + dy], axis=1) for dx in (0, 1) for dy in (0, 1)])


# ---------------------------------------------------------------- resampling

def sample_coords(rect: OrientedRect, shape: tuple[int, int], offset: tuple[int, int] = (0, 0)):
    """Image coordinates (x, y) of the pixel centers of the rectified raster.

    ``shape`` is (rows, cols) of the output; ``offset`` (col, row) shifts the
    window inside the full rectified frame of ``rect``.
    """
    out_h, out_w = shape
    W, H = round(rect.width), round(rect.height)
    u = np.arange(out_w) + offset[0] + 0.5 - W / 2
    v = np.arange(out_h) + offset[1] + 0.5 - H / 2
    uu, vv = np.meshgrid(u, v)
    return rect.to_image(uu, vv)


def bilinear(img: RawImage, xs: np.ndarray, ys: np.ndarray) -> RawImage:
    h, w = img.shape[:2]
    fx, fy = xs - 0.5, ys - 0.5  # continuous -> array index space
    if fx.size and (fx.min() < -1e-6 or fy.min() < -1e-6 or fx.max() > w - 1 + 1e-6 or fy.max() > h - 1 + 1e-6):
        raise OutOfBounds("sampling window leaves the image")
    fx = np.clip(fx, 0, w - 1)
    fy = np.clip(fy, 0, h - 1)
    x0 = np.minimum(np.floor(fx).astype(np.int64), w - 2 if w > 1 else 0)
    y0 = np.minimum(np.floor(fy).astype(np.int64), h - 2 if h > 1 else 0)
    ax = (fx - x0)[..., None]
    ay = (fy - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    src = img.astype(np.float64)
    top = src[y0, x0] * (1 - ax) + src[y0, x1] * ax
    bot = src[y1, x0] * (1 - ax) + src[y1, x1] * ax
    out = top * (1 - ay) + bot * ay
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def crop_origin(rect: OrientedRect, offset: tuple[int, int] = (0, 0)) -> tuple[int, int] | None:
    """Integer top-left of the window when rectifying ``rect`` is a plain crop, else None."""
    if rect.angle != 0.0:
        return None
    x0 = rect.center[0] - round(rect.width) / 2 + offset[0]
    y0 = rect.center[1] - round(rect.height) / 2 + offset[1]
    if x0 != int(x0) or y0 != int(y0):
        return None
    return int(x0), int(y0)


def _integral_crop(img: RawImage, rect: OrientedRect, shape, offset):
    origin = crop_origin(rect, offset)
    if origin is None:
        return None
    x0, y0 = origin
    h, w = img.shape[:2]
    if x0 < 0 or y0 < 0 or x0 + shape[1] > w or y0 + shape[0] > h:
        raise OutOfBounds(f"crop {x0},{y0} size {shape[1]}x{shape[0]} leaves the {w}x{h} image")
    return img[y0:y0 + shape[0], x0:x0 + shape[1]].copy()


def rectify(img: RawImage, rect: OrientedRect, window: tuple[int, int, int, int] | None = None) -> RawImage:
    """Rotate ``img`` by ``-rect.angle`` about the rect center and crop the rect.

    ``window`` = (x0, y0, x1, y1) restricts output to a sub-box of the
    rectified frame. Unrotated rects on the integer lattice are a plain crop.
    """
    if window is None:
        window = (0, 0, round(rect.width), round(rect.height))
    x0, y0, x1, y1 = window
    shape, offset = (y1 - y0, x1 - x0), (x0, y0)
    crop = _integral_crop(img, rect, shape, offset)
    if crop is not None:
        return crop
    xs, ys = sample_coords(rect, shape, offset)
    return bilinear(img, xs, ys)


# ---------------------------------------------------------------- grid slicing

def _bounds(size: int, n: int) -> list[int]:
    return [i * size // n for i in range(n + 1)]


def cell_bounds(height: int, width: int, n: int) -> tuple[list[int], list[int]]:
    return _bounds(height, n), _bounds(width, n)


def slice_grid(img: RawImage, n: int) -> list[list[list[RawImage]]]:
    """Split into ``n x n`` cells, each split into quadrants [TL, TR, BL, BR]."""
    h, w = img.shape[:2]
    if h < 2 * n or w < 2 * n:
        raise TooSmall(f"{w}x{h} image cannot hold a {n}x{n} grid of quadrants")
    rows, cols = cell_bounds(h, w, n)
    grid = []
    for r in range(n):
        line = []
        for c in range(n):
            cell = img[rows[r]:rows[r + 1], cols[c]:cols[c + 1]]
            ch, cw = cell.shape[:2]
            mh, mw = ch // 2, cw // 2
            line.append([cell[:mh, :mw], cell[:mh, mw:], cell[mh:, :mw], cell[mh:, mw:]])
        grid.append(line)
    return grid
