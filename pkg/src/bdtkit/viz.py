"""Standalone SVG renderings: sequence heatmap, strategy bars, error/time scatter."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BlockFace, IncompleteSequence, PlacementSequence
from .features import TrialPoint
from .strategy import KIND_ORDER, Measure, StrategyReport

SVG_NS = "http://www.w3.org/2000/svg"

LIGHTEST_GREEN = (229, 245, 224)
DARKEST_GREEN = (0, 68, 27)
BEST_COLOR = "#d62728"
NEUTRAL_COLOR = "#9e9e9e"
RED = "#c81e1e"
WHITE = "#f0f0f0"

# cycled per participant
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)


@dataclass(frozen=True)
class SvgDoc:
    width: int
    height: int
    body: str

    def __str__(self) -> str:
        return self.body

    def save(self, path) -> None:
        Path(path).write_text(self.body, encoding="utf-8")


def _svg(width: int, height: int) -> ET.Element:
    return ET.Element("svg", {
        "xmlns": SVG_NS, "version": "1.1",
        "width": str(width), "height": str(height), "viewBox": f"0 0 {width} {height}",
    })


def _finish(root: ET.Element) -> SvgDoc:
    ET.indent(root)
    body = '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"
    return SvgDoc(int(root.get("width")), int(root.get("height")), body)


def _sub(parent, tag, text=None, **attrs) -> ET.Element:
    el = ET.SubElement(parent, tag, {k.replace("_", "-"): _fmt(v) for k, v in attrs.items()})
    if text is not None:
        el.text = text
    return el


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.2f}".rstrip("0").rstrip(".")
    return str(v)


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


# ---------------------------------------------------------------- heatmap

def gradient_rgb(rank: int, max_rank: int) -> tuple[int, int, int]:
    """Green for a rank: lightest at 1, darkest at ``max_rank``."""
    t = 0.5 if max_rank <= 1 else (rank - 1) / (max_rank - 1)
    return tuple(int(round(a + (b - a) * t)) for a, b in zip(LIGHTEST_GREEN, DARKEST_GREEN))


def _draw_face(g, face: BlockFace, x, y, s):
    if face in (BlockFace.RED, BlockFace.WHITE):
        _sub(g, "rect", x=x, y=y, width=s, height=s, fill=RED if face == BlockFace.RED else WHITE, stroke="#333")
        return
    if face not in (BlockFace.NW, BlockFace.NE, BlockFace.SW, BlockFace.SE):
        _sub(g, "rect", x=x, y=y, width=s, height=s, fill="#dddddd", stroke="#333")
        return
    _sub(g, "rect", x=x, y=y, width=s, height=s, fill=WHITE, stroke="#333")
    tl, tr, bl, br = (x, y), (x + s, y), (x, y + s), (x + s, y + s)
    tri = {BlockFace.NE: (tl, tr, br), BlockFace.SW: (tl, bl, br), BlockFace.NW: (tl, tr, bl), BlockFace.SE: (tr, br, bl)}[face]
    _sub(g, "polygon", points=" ".join(f"{_fmt(float(px))},{_fmt(float(py))}" for px, py in tri), fill=RED)


def sequence_heatmap(seq: PlacementSequence, design=None, cell: int = 40) -> SvgDoc:
    if not seq.complete:
        raise IncompleteSequence("heatmap needs a complete sequence")
    n = seq.spec.n
    pad = 10
    panels = 2 if design is not None else 1
    width = pad + panels * (n * cell + pad)
    height = 2 * pad + n * cell
    root = _svg(width, height)
    _sub(root, "title", "block placement sequence")
    x0 = pad
    if design is not None:
        faces = np.asarray(design, dtype=np.uint8).reshape(n, n)
        g = _sub(root, "g", id="design")
        for r in range(n):
            for c in range(n):
                _draw_face(g, BlockFace(int(faces[r, c])), x0 + c * cell, pad + r * cell, cell)
        x0 += n * cell + pad
    g = _sub(root, "g", id="sequence")
    max_rank = n * n
    for r in range(n):
        for c in range(n):
            rank = int(seq.ranks[r, c])
            rgb = gradient_rgb(rank, max_rank)
            x, y = x0 + c * cell, pad + r * cell
            _sub(g, "rect", x=x, y=y, width=cell, height=cell, fill=_hex(rgb), stroke="#333", data_rank=rank)
            ink = "#000" if sum(rgb) > 382 else "#fff"
            _sub(g, "text", str(rank), x=x + cell / 2, y=y + cell / 2 + 4, text_anchor="middle", font_size=12, fill=ink)
    return _finish(root)


# ---------------------------------------------------------------- bars

def bar_fraction(score: float, measure: Measure) -> float:
    if measure is Measure.TAU:
        return (score + 1.0) / 2.0
    return score


def strategy_bars(report: StrategyReport, width: int = 300, height: int = 200) -> SvgDoc:
    root = _svg(width, height)
    _sub(root, "title", f"strategy similarity ({report.measure.value})")
    top, bottom, left = 20, 30, 20
    plot_h = height - top - bottom
    slot = (width - 2 * left) / len(KIND_ORDER)
    g = _sub(root, "g", id="bars")
    for i, kind in enumerate(KIND_ORDER):
        x = left + i * slot + slot * 0.15
        score = report.scores.get(kind)
        h = 0.0 if score is None else max(0.0, min(1.0, bar_fraction(score, report.measure))) * plot_h
        fill = BEST_COLOR if kind == report.best_kind else NEUTRAL_COLOR
        _sub(g, "rect", x=float(x), y=float(top + plot_h - h), width=float(slot * 0.7), height=float(h),
             fill=fill, data_kind=kind.value, data_score="n/a" if score is None else f"{score:.6f}")
        _sub(g, "text", kind.value, x=float(x + slot * 0.35), y=height - bottom + 15, text_anchor="middle", font_size=11)
    _sub(root, "line", x1=left, y1=top + plot_h, x2=width - left, y2=top + plot_h, stroke="#000")
    if report.tie_flag:
        _sub(root, "text", "tie", id="tie", x=width - left, y=14, text_anchor="end", font_size=11, fill=BEST_COLOR)
    return _finish(root)


# ---------------------------------------------------------------- scatter

def _axis_range(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        span = abs(hi) or 1.0
    return lo - 0.1 * span, hi + 0.1 * span


def participant_colors(points: Sequence[TrialPoint]) -> dict[str, str]:
    colors: dict[str, str] = {}
    for p in points:
        if p.participant not in colors:
            colors[p.participant] = PALETTE[len(colors) % len(PALETTE)]
    return colors


def scatter(points: Sequence[TrialPoint], width: int = 480, height: int = 360) -> SvgDoc:
    if not points:
        raise ValueError("scatter needs at least one point")
    root = _svg(width, height)
    _sub(root, "title", "error count vs completion time")
    left, right, top, bottom = 50, 110, 20, 40
    pw, ph = width - left - right, height - top - bottom
    xlo, xhi = _axis_range([p.completion_seconds for p in points])
    ylo, yhi = _axis_range([float(p.error_count) for p in points])

    def sx(v):
        return left + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return top + ph - (v - ylo) / (yhi - ylo) * ph

    axes = _sub(root, "g", id="axes", stroke="#000")
    _sub(axes, "line", x1=left, y1=top + ph, x2=left + pw, y2=top + ph)
    _sub(axes, "line", x1=left, y1=top, x2=left, y2=top + ph)
    ticks = _sub(root, "g", id="ticks", font_size=10)
    for i in range(5):
        xv = xlo + (xhi - xlo) * i / 4
        yv = ylo + (yhi - ylo) * i / 4
        _sub(ticks, "text", f"{xv:.3g}", x=float(sx(xv)), y=top + ph + 14, text_anchor="middle")
        _sub(ticks, "text", f"{yv:.3g}", x=left - 4, y=float(sy(yv) + 3), text_anchor="end")
    _sub(root, "text", "completion time (s)", x=left + pw / 2, y=height - 6, text_anchor="middle", font_size=11)
    _sub(root, "text", "errors", x=12, y=top + ph / 2, text_anchor="middle", font_size=11,
         transform=f"rotate(-90 12 {_fmt(top + ph / 2)})")
    colors = participant_colors(points)
    g = _sub(root, "g", id="points")
    for p in points:
        _sub(g, "circle", cx=float(sx(p.completion_seconds)), cy=float(sy(p.error_count)), r=4,
             fill=colors[p.participant], data_participant=p.participant, data_puzzle=p.puzzle)
    legend = _sub(root, "g", id="legend", font_size=10)
    for i, (name, color) in enumerate(colors.items()):
        y = top + 6 + i * 14
        _sub(legend, "circle", cx=left + pw + 15, cy=y, r=4, fill=color)
        _sub(legend, "text", name, x=left + pw + 24, y=y + 3)
    return _finish(root)
