"""End-to-end wiring: frames -> filtered timeline -> trial analytics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import abis, imaging
from .config import Config
from .core import BdtError, GridSpec, PlacementSequence, Timeline
from .features import FeatureReport, extract_features
from .strategy import StrategyReport, classify, derive_sequence

FRAME_GLOB = "frame_*.ppm"


def frame_name(i: int) -> str:
    return f"frame_{i:06d}.ppm"


def frame_paths(frames_dir) -> list[Path]:
    paths = sorted(Path(frames_dir).glob(FRAME_GLOB))
    if not paths:
        raise FileNotFoundError(f"no {FRAME_GLOB} files in {frames_dir}")
    return paths


def load_frames(frames_dir) -> Iterator[np.ndarray]:
    for p in frame_paths(frames_dir):
        yield imaging.load_ppm(p)


@dataclass
class Detection:
    raw: Timeline
    timeline: Timeline
    area: abis.ConstructionArea


def detect_trial(
    frames: Iterable[np.ndarray],
    spec: GridSpec,
    config: Config | None = None,
    hands: dict[int, list] | None = None,
    motion_intervals: list[tuple[int, int]] | None = None,
) -> Detection:
    """Parallel-safe per-frame detection followed by the sequential filters.

    Order: IoB carry-forward (when hands are given), smoothing (when enabled),
    then motion-interval removal (when given; output becomes sparse).
    """
    config = config or Config()
    raw, area = abis.detect_frames(frames, spec, config.color_method(), config.detector_config())
    tl = raw
    if hands is not None:
        tl = abis.filter_occlusions(tl, hands, area.grid_box, config.iob_threshold)
    if config.smoothing:
        tl = abis.smooth(tl)
    if motion_intervals:
        tl = abis.filter_motion_intervals(tl, motion_intervals)
    return Detection(raw, tl, area)


@dataclass
class Analysis:
    sequence: PlacementSequence
    strategy: StrategyReport | None
    strategy_status: str
    features: FeatureReport


def analyze_timeline(tl: Timeline, config: Config | None = None) -> Analysis:
    config = config or Config()
    seq = derive_sequence(tl)
    report, status = None, "ok"
    if not seq.complete:
        status = "skipped: incomplete"
    else:
        try:
            report = classify(seq, measure=config.measure)
        except BdtError as exc:
            status = f"skipped: {exc}"
    return Analysis(seq, report, status, extract_features(tl, config.swap_window))
