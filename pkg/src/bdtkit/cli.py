"""Command-line entry point: ``bdtkit simulate|detect|analyze|evaluate|viz|script``.

Exit codes: 0 ok, 2 input validation, 3 vision failure, 4 spec mismatch.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import abis, formats, imaging, simulator, viz
from .config import Config, ConfigError, load_config
from .core import BdtError, BlockFace, GridSpec, PlacementSequence, SpecMismatch
from .features import TrialPoint
from .pipeline import analyze_timeline, detect_trial, frame_name, load_frames
from .strategy import KIND_ORDER, Measure, StrategyKind, StrategyReport, derive_sequence, generate_sample_set

EXIT_OK, EXIT_INPUT, EXIT_VISION, EXIT_MISMATCH = 0, 2, 3, 4

VISION_ERRORS = (abis.GridNotFound, abis.NoInnerGreen, imaging.OutOfBounds, imaging.TooSmall)


class InputError(BdtError):
    pass


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    script = formats.read_script(args.script)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    renderer = simulator.Renderer(script)
    for i, frame in enumerate(renderer.frames()):
        imaging.save_ppm(frame, out / frame_name(i))
    truth = renderer.truth()
    formats.write_truth(out / "truth.json", truth)
    formats.write_hands(out / "hands.jsonl", truth.hand_boxes)
    formats.write_script(out / "script.json", script)
    print(f"wrote {script.length} frames to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- detect

def _detect_config(args) -> Config:
    cfg = load_config(args.config)
    method = args.method
    if args.k is not None and method is None and cfg.method == "rgb":
        method = "kmeans"
    return cfg.override(
        n=args.n, fps=Fraction(args.fps) if args.fps else None, method=method, k=args.k,
        threshold=args.threshold, bins=args.bins, iob_threshold=args.iob_threshold, smoothing=args.smoothing,
    )


def cmd_detect(args) -> int:
    cfg = _detect_config(args)
    if cfg.n is None:
        raise InputError("grid size unknown: pass --n or set grid.n in the config")
    frames = list(load_frames(args.frames_dir))
    h, w = frames[0].shape[:2]
    spec = GridSpec(cfg.n, cfg.fps, w, h)
    hands = formats.read_hands(args.hands, w, h) if args.hands else None
    motion = formats.read_motion_intervals(args.motion_intervals) if args.motion_intervals else None
    det = detect_trial(frames, spec, cfg, hands, motion)
    settings = cfg.settings()
    settings["hands"] = args.hands is not None
    settings["motion_intervals"] = args.motion_intervals is not None
    settings["construction_area"] = {
        "center": list(det.area.rect.center), "width": det.area.rect.width,
        "height": det.area.rect.height, "angle": det.area.rect.angle,
        "inner": list(det.area.inner), "grid_box": list(det.area.grid_box),
    }
    out = Path(args.out) if args.out else Path(args.frames_dir) / "timeline.json"
    formats.write_timeline(out, det.timeline, settings=settings, rle=cfg.rle)
    print(f"wrote {len(det.timeline)} frames to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze

def _final_design(tl) -> np.ndarray | None:
    if not len(tl):
        return None
    last = tl.faces[-1]
    return last if np.all((last != BlockFace.EMPTY) & (last != BlockFace.INVALID)) else None


def cmd_analyze(args) -> int:
    cfg = load_config(args.config).override(
        measure=Measure(args.measure) if args.measure else None, swap_window=args.swap_window
    )
    tl, _ = formats.read_timeline(args.timeline)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = analyze_timeline(tl, cfg)
    formats.write_json(out / "sequence.json", {
        "spec": formats.spec_to_dict(tl.spec),
        "ranks": result.sequence.ranks.tolist(),
        "complete": result.sequence.complete,
    })
    strategy = {"status": result.strategy_status}
    if result.strategy is not None:
        strategy.update(result.strategy.to_dict())
        viz.strategy_bars(result.strategy).save(out / "strategy.svg")
        viz.sequence_heatmap(result.sequence, _final_design(tl)).save(out / "heatmap.svg")
    formats.write_json(out / "strategy.json", strategy)
    formats.write_json(out / "features.json", result.features.to_dict())
    if args.trials:
        if not (args.participant and args.puzzle):
            raise InputError("--trials needs --participant and --puzzle")
        path = Path(args.trials)
        points = formats.read_trials(path) if path.exists() else []
        points.append(TrialPoint(args.participant, args.puzzle, result.features.error_count,
                                 max(result.features.completion_seconds, 1e-9)))
        formats.write_trials(path, points)
    best = result.strategy.best_kind.value if result.strategy else result.strategy_status
    print(f"strategy={best} errors={result.features.error_count} seconds={result.features.completion_seconds:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    detected, _ = formats.read_timeline(args.detected)
    truth, _ = formats.read_timeline(args.truth)
    acc = abis.evaluate_accuracy(detected, truth)
    print(f"accuracy={acc:.6f} frames={len(detected)} cells={detected.spec.cells}")
    return EXIT_OK


# ---------------------------------------------------------------- viz

def cmd_viz(args) -> int:
    if args.kind == "scatter":
        doc = viz.scatter(formats.read_trials(args.input))
    elif args.kind == "heatmap":
        tl, _ = formats.read_timeline(args.input)
        doc = viz.sequence_heatmap(derive_sequence(tl), _final_design(tl))
    else:
        data = formats.read_json(args.input)
        if "scores" not in data:
            raise InputError(f"{args.input}: no strategy scores ({data.get('status', 'unknown status')})")
        scores = {StrategyKind(k): float(v) for k, v in data["scores"].items()}
        report = StrategyReport(Measure(data["measure"]), scores, StrategyKind(data["best_kind"]),
                                bool(data["tie_flag"]), {StrategyKind(k): v for k, v in data["cardinalities"].items()})
        doc = viz.strategy_bars(report)
    doc.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- script

DEFAULT_DESIGNS = {
    3: [["Red", "NE", "White"], ["SW", "Red", "NW"], ["White", "SE", "Red"]],
    4: [["NW", "Red", "Red", "NE"], ["Red", "White", "White", "Red"], ["Red", "White", "White", "Red"], ["SW", "Red", "Red", "SE"]],
}


def cmd_script(args) -> int:
    geometry = simulator.PRESETS[args.preset]
    geometry = simulator.Geometry(geometry.center, geometry.cell_px, geometry.tape_px, args.angle)
    spec = GridSpec(args.n, Fraction(args.fps))
    sample = generate_sample_set(StrategyKind(args.strategy), spec)
    if not 0 <= args.sample < len(sample):
        raise InputError(f"--sample must be in [0, {len(sample)})")
    seq = PlacementSequence.from_vector(spec, sample.vectors[args.sample])
    design = [[BlockFace.parse(x) for x in row] for row in DEFAULT_DESIGNS[args.n]]
    script = simulator.scripted_strategy_trial(
        spec, design, seq, args.frames_per_move, geometry=geometry,
        sweep_frames=args.sweep_frames, noise_sigma=args.noise, seed=args.seed,
    )
    formats.write_script(args.out, script)
    print(f"wrote {args.out} ({script.length} frames)")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdtkit", description="Block design test video analysis")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a trial script to frames and ground truth")
    s.add_argument("script")
    s.add_argument("out_dir")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("detect", help="frame-level block identification")
    d.add_argument("frames_dir")
    d.add_argument("--hands", help="hand boxes file (JSON lines)")
    d.add_argument("--motion-intervals", help="JSON with motion_intervals to exclude")
    d.add_argument("--config")
    d.add_argument("--out")
    d.add_argument("--n", type=int)
    d.add_argument("--fps")
    d.add_argument("--method", choices=["rgb", "kmeans", "knn"])
    d.add_argument("--k", type=int)
    d.add_argument("--threshold", type=float)
    d.add_argument("--bins", type=int)
    d.add_argument("--iob-threshold", type=float)
    d.add_argument("--smoothing", action=argparse.BooleanOptionalAction, default=None)
    d.set_defaults(func=cmd_detect)

    a = sub.add_parser("analyze", help="sequence, strategy and feature analysis of a timeline")
    a.add_argument("timeline")
    a.add_argument("out_dir")
    a.add_argument("--config")
    a.add_argument("--measure", choices=[m.value for m in Measure])
    a.add_argument("--swap-window", type=int)
    a.add_argument("--trials", help="append this trial to a participant,puzzle,errors,seconds CSV")
    a.add_argument("--participant")
    a.add_argument("--puzzle")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("evaluate", help="per-cell accuracy of a detected timeline")
    e.add_argument("detected")
    e.add_argument("truth")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("viz", help="render an SVG")
    v.add_argument("kind", choices=["heatmap", "bars", "scatter"])
    v.add_argument("input", help="timeline (heatmap), strategy.json (bars) or trials CSV (scatter)")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_viz)

    t = sub.add_parser("script", help="write a trial script following one pure strategy")
    t.add_argument("--strategy", choices=[k.value for k in KIND_ORDER], default="r-r")
    t.add_argument("--sample", type=int, default=0, help="index into the strategy's sample set")
    t.add_argument("--n", type=int, choices=[3, 4], default=4)
    t.add_argument("--fps", default="10")
    t.add_argument("--preset", choices=sorted(simulator.PRESETS), default="desk")
    t.add_argument("--angle", type=float, default=0.0)
    t.add_argument("--noise", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--frames-per-move", type=int, default=10)
    t.add_argument("--sweep-frames", type=int, default=0, help="frames the hand takes to slide over the grid")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_script)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecMismatch as exc:
        return _fail(EXIT_MISMATCH, str(exc))
    except VISION_ERRORS as exc:
        return _fail(EXIT_VISION, f"{type(exc).__name__}: {exc}")
    except (simulator.ScriptError, ConfigError, formats.FormatError, InputError, imaging.MalformedPpm,
            FileNotFoundError, BdtError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
