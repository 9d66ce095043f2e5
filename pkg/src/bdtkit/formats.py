"""On-disk formats: timelines, hand boxes, trial scripts, reports and trial tables."""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .core import BdtError, BlockFace, CellPos, GridSpec, Timeline
from .features import TrialPoint
from .simulator import Event, Geometry, GroundTruth, HandMove, Palette, ScriptError, TrialScript

TIMELINE_FORMAT = "bdt-timeline"


class FormatError(BdtError):
    pass


# ---------------------------------------------------------------- spec

def spec_to_dict(spec: GridSpec) -> dict:
    return {"n": spec.n, "fps": str(spec.fps), "image_width": spec.image_width, "image_height": spec.image_height}


def spec_from_dict(d: dict, where: str = "spec") -> GridSpec:
    try:
        return GridSpec(
            n=int(d["n"]),
            fps=Fraction(str(d.get("fps", 10))),
            image_width=int(d.get("image_width", 640)),
            image_height=int(d.get("image_height", 480)),
        )
    except KeyError as exc:
        raise ScriptError(f"{where}.{exc.args[0]}", "missing") from None
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ScriptError(where, str(exc)) from None


# ---------------------------------------------------------------- timeline

def timeline_to_dict(tl: Timeline, settings: dict | None = None, rle: bool = False) -> dict:
    out: dict[str, Any] = {
        "format": TIMELINE_FORMAT,
        "version": 1,
        "spec": spec_to_dict(tl.spec),
        "sparse": tl.sparse,
    }
    if settings is not None:
        out["settings"] = settings
    labels = np.array([f.label for f in BlockFace])
    if rle:
        out["encoding"] = "rle"
        out["frame_indices"] = tl.frames.tolist()
        tracks = []
        for pos in tl.spec.positions():
            runs: list[list] = []
            for code in tl.track(pos).tolist():
                if runs and runs[-1][0] == labels[code]:
                    runs[-1][1] += 1
                else:
                    runs.append([str(labels[code]), 1])
            tracks.append(runs)
        out["tracks"] = tracks
    else:
        out["encoding"] = "frames"
        out["frames"] = [{"frame": int(f), "faces": labels[g].tolist()} for f, g in zip(tl.frames, tl.faces)]
    return out


def timeline_from_dict(d: dict) -> Timeline:
    if d.get("format") != TIMELINE_FORMAT:
        raise FormatError(f"not a timeline file (format={d.get('format')!r})")
    if d.get("version") != 1:
        raise FormatError(f"unsupported timeline version {d.get('version')!r}")
    if not isinstance(d.get("spec"), dict):
        raise FormatError("timeline has no spec")
    try:
        spec = spec_from_dict(d["spec"])
    except ScriptError as exc:
        raise FormatError(f"bad timeline {exc}") from None
    n = spec.n
    try:
        if d.get("encoding", "frames") == "rle":
            frames = np.asarray(d["frame_indices"], dtype=np.int64)
            tracks = d["tracks"]
            if len(tracks) != n * n:
                raise FormatError(f"expected {n * n} tracks, got {len(tracks)}")
            faces = np.zeros((len(frames), n * n), dtype=np.uint8)
            for i, runs in enumerate(tracks):
                expanded = [BlockFace.parse(label) for label, count in runs for _ in range(int(count))]
                if len(expanded) != len(frames):
                    raise FormatError(f"track {i} covers {len(expanded)} frames, expected {len(frames)}")
                faces[:, i] = expanded
        else:
            frames = np.asarray([fr["frame"] for fr in d["frames"]], dtype=np.int64)
            faces = np.array(
                [[[BlockFace.parse(x) for x in row] for row in fr["faces"]] for fr in d["frames"]], dtype=np.uint8
            )
            if faces.size and faces.shape[1:] != (n, n):
                raise FormatError(f"frame grids have shape {faces.shape[1:]}, expected {(n, n)}")
        return Timeline(spec, frames, faces.reshape(len(frames), n, n), sparse=bool(d.get("sparse", False)))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad timeline: {exc}") from None


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def write_timeline(path, tl: Timeline, settings: dict | None = None, rle: bool = False, **extra) -> None:
    payload = timeline_to_dict(tl, settings, rle)
    payload.update(extra)
    write_json(path, payload)


def read_timeline(path) -> tuple[Timeline, dict]:
    d = read_json(path)
    return timeline_from_dict(d), d


# ---------------------------------------------------------------- hands

def write_hands(path, boxes_per_frame: Iterable[Iterable[Iterable[float]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, boxes in enumerate(boxes_per_frame):
            fh.write(json.dumps({"frame": i, "boxes": [list(b) for b in boxes]}) + "\n")


def read_hands(path, width: int | None = None, height: int | None = None) -> dict[int, list[tuple]]:
    """Per-frame boxes, clipped to the frame when its size is given; degenerate boxes dropped."""
    out: dict[int, list[tuple]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            frame = int(rec["frame"])
            boxes = [tuple(float(v) for v in b) for b in rec["boxes"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad hand record ({exc})") from None
        kept = []
        for b in boxes:
            if len(b) != 4:
                raise FormatError(f"{path}:{lineno}: box needs 4 coordinates")
            x0, y0, x1, y1 = b
            if width is not None:
                x0, x1 = max(0.0, x0), min(float(width), x1)
            if height is not None:
                y0, y1 = max(0.0, y0), min(float(height), y1)
            if x0 < x1 and y0 < y1:
                kept.append((x0, y0, x1, y1))
        out.setdefault(frame, []).extend(kept)
    return out


# ---------------------------------------------------------------- script

def _rgb(v, where):
    if not (isinstance(v, (list, tuple)) and len(v) == 3 and all(isinstance(c, int) and 0 <= c <= 255 for c in v)):
        raise ScriptError(where, f"expected [r, g, b] with integer channels in 0..255, got {v!r}")
    return tuple(v)


def _box(v, where):
    if not (isinstance(v, (list, tuple)) and len(v) == 4 and all(isinstance(c, (int, float)) for c in v)):
        raise ScriptError(where, f"expected [x0, y0, x1, y1], got {v!r}")
    return tuple(float(c) for c in v)


def script_to_dict(s: TrialScript) -> dict:
    g, p = s.geometry, s.palette
    return {
        "spec": spec_to_dict(s.spec),
        "geometry": {"center": list(g.center), "cell_px": g.cell_px, "tape_px": g.tape_px, "angle": g.angle},
        "palette": {k: list(getattr(p, k)) for k in ("background", "tape", "red", "white", "hand")},
        "events": [{"frame": e.frame, "cell": [e.cell.row, e.cell.col], "face": e.face.label} for e in s.events],
        "hand_moves": [
            {"frame_start": h.frame_start, "frame_end": h.frame_end, "start": list(h.start), "end": list(h.end)}
            for h in s.hand_moves
        ],
        "noise_sigma": s.noise_sigma,
        "seed": s.seed,
        "n_frames": s.n_frames,
        "supersample": s.supersample,
    }


def script_from_dict(d: dict) -> TrialScript:
    if not isinstance(d, dict):
        raise ScriptError("script", "top level must be an object")
    if "spec" not in d:
        raise ScriptError("spec", "missing")
    spec = spec_from_dict(d["spec"])
    gd = d.get("geometry", {})
    try:
        center = gd.get("center", [320, 240])
        geometry = Geometry(
            center=(float(center[0]), float(center[1])),
            cell_px=int(gd.get("cell_px", 40)),
            tape_px=int(gd.get("tape_px", 8)),
            angle=float(gd.get("angle", 0.0)),
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise ScriptError("geometry", str(exc)) from None
    pd = d.get("palette", {})
    defaults = Palette()
    palette = Palette(**{k: _rgb(pd[k], f"palette.{k}") if k in pd else getattr(defaults, k)
                         for k in ("background", "tape", "red", "white", "hand")})
    events = []
    for i, e in enumerate(d.get("events", [])):
        try:
            cell = CellPos(int(e["cell"][0]), int(e["cell"][1]))
            events.append(Event(int(e["frame"]), cell, BlockFace.parse(e["face"])))
        except KeyError as exc:
            raise ScriptError(f"events[{i}].{exc.args[0]}", "missing") from None
        except (TypeError, ValueError, IndexError) as exc:
            raise ScriptError(f"events[{i}]", str(exc)) from None
    moves = []
    for i, h in enumerate(d.get("hand_moves", [])):
        try:
            moves.append(HandMove(int(h["frame_start"]), int(h["frame_end"]),
                                  _box(h["start"], f"hand_moves[{i}].start"), _box(h["end"], f"hand_moves[{i}].end")))
        except KeyError as exc:
            raise ScriptError(f"hand_moves[{i}].{exc.args[0]}", "missing") from None
    try:
        script = TrialScript(
            spec=spec,
            events=tuple(events),
            hand_moves=tuple(moves),
            geometry=geometry,
            palette=palette,
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
            n_frames=None if d.get("n_frames") is None else int(d["n_frames"]),
            supersample=int(d.get("supersample", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ScriptError("script", str(exc)) from None
    script.validate()
    return script


def read_script(path) -> TrialScript:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScriptError("script", f"invalid JSON ({exc})") from None
    return script_from_dict(d)


def write_script(path, script: TrialScript) -> None:
    write_json(path, script_to_dict(script))


# ---------------------------------------------------------------- ground truth

def write_truth(path, truth: GroundTruth) -> None:
    write_timeline(
        path, truth.timeline, rle=True,
        motion_intervals=[list(iv) for iv in truth.motion_intervals],
        grid_box=list(truth.grid_box),
        tape_box=list(truth.tape_box),
    )


def read_motion_intervals(path) -> list[tuple[int, int]]:
    """Intervals from a truth file or a bare ``[[start, end], ...]`` JSON list."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    raw = d.get("motion_intervals", []) if isinstance(d, dict) else d
    return [(int(a), int(b)) for a, b in raw]


# ---------------------------------------------------------------- trial table

TRIAL_HEADER = ["participant", "puzzle", "errors", "seconds"]


def write_trials(path, points: Iterable[TrialPoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_HEADER)
        for p in points:
            w.writerow([p.participant, p.puzzle, p.error_count, f"{p.completion_seconds:.6g}"])


def read_trials(path) -> list[TrialPoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRIAL_HEADER:
            raise FormatError(f"{path}: header must be {','.join(TRIAL_HEADER)}")
        try:
            return [TrialPoint(r["participant"], r["puzzle"], int(r["errors"]), float(r["seconds"])) for r in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
