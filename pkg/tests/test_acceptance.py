"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict (shown in the pytest terminal
summary) before asserting.
"""

import itertools
import math
import time
import xml.etree.ElementTree as ET
from fractions import Fraction

import numpy as np

from bdtkit import abis, simulator, viz
from bdtkit.abis import KMeans, QuadrantColor, RgbAveraging, classify_quadrant, face_from_quadrants
from bdtkit.cli import main
from bdtkit.config import Config
from bdtkit.core import BlockFace, CellPos, GridSpec, PlacementSequence, Timeline, rank_vector
from bdtkit.features import TrialPoint, count_errors, detect_swaps, pearson
from bdtkit.pipeline import detect_trial
from bdtkit.strategy import (
    KIND_ORDER, AllTied, StrategyKind, _vectors, classify, corners, derive_sequence, generate_sample_set,
    kendall_tau, perimeter_cycle,
)

from conftest import DESIGN_4, record_acceptance

F = BlockFace
Q = QuadrantColor


# ---------------------------------------------------------------- 1

def _oracle_table():
    """Face for every (TL, TR, BL, BR) combination, enumerated pattern by pattern."""
    table = {}
    for quads in itertools.product(Q, repeat=4):
        tl, tr, bl, br = quads
        fired = []
        if tr is Q.RED and bl is Q.WHITE:
            fired.append(F.NE)
        if bl is Q.RED and tr is Q.WHITE:
            fired.append(F.SW)
        if tl is Q.RED and br is Q.WHITE:
            fired.append(F.NW)
        if br is Q.RED and tl is Q.WHITE:
            fired.append(F.SE)
        table[quads] = fired[0] if len(fired) == 1 else F.INVALID
    table[(Q.GREEN,) * 4] = F.EMPTY
    table[(Q.RED,) * 4] = F.RED
    table[(Q.WHITE,) * 4] = F.WHITE
    return table


def test_1_truth_table():
    oracle = _oracle_table()
    start = time.perf_counter()
    mismatches = [q for q in itertools.product(Q, repeat=4) if face_from_quadrants(*q) is not oracle[q]]
    elapsed = time.perf_counter() - start
    ok = len(oracle) == 256 and not mismatches and elapsed < 1.0
    record_acceptance(1, ok, f"{256 - len(mismatches)}/256 combinations agree, {elapsed * 1000:.1f} ms")
    assert ok


# ---------------------------------------------------------------- 2

def test_2_clean_round_trip():
    spec = GridSpec(4)
    start = time.perf_counter()
    seq = PlacementSequence.from_order(spec, list(spec.positions()))
    script = simulator.scripted_strategy_trial(spec, DESIGN_4, seq, 11, hands=False, n_frames=200)
    frames, truth = simulator.render_trial(script)
    det = detect_trial(frames, spec)
    acc = abis.evaluate_accuracy(det.timeline, truth.timeline)
    elapsed = time.perf_counter() - start
    ok = len(frames) == 200 and len(script.events) == 16 and acc == 1.0 and elapsed < 10.0
    record_acceptance(2, ok, f"accuracy={acc:.6f} over {len(frames)} frames in {elapsed:.2f} s")
    assert ok


# ---------------------------------------------------------------- 3

def test_3_stress():
    spec = GridSpec(4)
    preset = simulator.PRESETS["paper-scale"]
    geometry = simulator.Geometry(preset.center, preset.cell_px, preset.tape_px, 7.0)
    seq = PlacementSequence.from_vector(spec, generate_sample_set(StrategyKind.ROW_BY_ROW, spec).vectors[0])
    script = simulator.scripted_strategy_trial(spec, DESIGN_4, seq, 10, geometry=geometry,
                                               noise_sigma=6.0, seed=3, sweep_frames=3)
    frames, truth = simulator.render_trial(script)
    hands = dict(enumerate(truth.hand_boxes))
    filtered = detect_trial(frames, spec, Config(iob_threshold=0.3, smoothing=True), hands)
    raw = detect_trial(frames, spec, Config(smoothing=False))
    acc_on = abis.evaluate_accuracy(filtered.timeline, truth.timeline)
    acc_off = abis.evaluate_accuracy(raw.timeline, truth.timeline)
    occluded = sum(1 for b in truth.hand_boxes if b)
    ok = geometry.cell_px == 7 and acc_on >= 0.95 and acc_on > acc_off
    record_acceptance(3, ok, f"filtered+smoothed={acc_on:.4f} vs raw={acc_off:.4f} "
                             f"({occluded}/{len(frames)} frames with hands)")
    assert ok


# ---------------------------------------------------------------- 4

def test_4_smoothing_properties():
    rng = np.random.default_rng(20240404)
    labels = np.array([F.EMPTY, F.RED, F.WHITE, F.NE, F.INVALID, F.INVALID], dtype=np.uint8)
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        length = int(rng.integers(1, 60))
        faces = labels[rng.integers(0, len(labels), size=(length, n, n))]
        tl = Timeline(GridSpec(n), np.arange(length), faces)
        once = abis.smooth(tl)
        twice = abis.smooth(once)
        keep = tl.faces != F.INVALID
        if twice != once or not np.array_equal(once.faces[keep], tl.faces[keep]):
            violations += 1
    ok = violations == 0
    record_acceptance(4, ok, f"{violations} violations over 1000 random timelines")
    assert ok


# ---------------------------------------------------------------- 5

def _brute_tau(x, y):
    p = q = t = u = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        sx = (x[j] > x[i]) - (x[j] < x[i])
        sy = (y[j] > y[i]) - (y[j] < y[i])
        if sx * sy > 0:
            p += 1
        elif sx * sy < 0:
            q += 1
        elif sx == 0 and sy != 0:
            t += 1
        elif sy == 0 and sx != 0:
            u += 1
    denom = (p + q + t) * (p + q + u)
    return None if denom == 0 else (Fraction(p - q), denom)


def _tau_delta(x, y):
    ref = _brute_tau(x, y)
    try:
        got = kendall_tau(x, y)
    except AllTied:
        return 0.0 if ref is None else math.inf
    if ref is None:
        return math.inf
    num, denom = ref
    return abs(got - float(num) / math.sqrt(denom))


def test_5_tau_oracle():
    perms = [list(p) for n in range(1, 6) for p in itertools.permutations(range(1, n + 1))]
    worst = max(_tau_delta(list(range(1, len(p) + 1)), p) for p in perms)
    rng = np.random.default_rng(55)
    tied = []
    for _ in range(1000):
        n = int(rng.integers(2, 17))
        tied.append((rng.integers(1, 6, size=n).tolist(), rng.integers(1, 6, size=n).tolist()))
    worst_tied = max(_tau_delta(x, y) for x, y in tied)
    ok = len(perms) == 153 and worst <= 1e-12 and worst_tied <= 1e-12
    record_acceptance(5, ok, f"153 permutations max|d|={worst:.2e}, 1000 tied lists max|d|={worst_tied:.2e}")
    assert ok


# ---------------------------------------------------------------- 6

def test_6_tau_endpoints():
    bad = []
    for n in range(2, 17):
        x = list(range(1, n + 1))
        if kendall_tau(x, x) != 1.0 or kendall_tau(x, x[::-1]) != -1.0:
            bad.append(n)
    ok = not bad
    record_acceptance(6, ok, "identity=1.0 and full inversion=-1.0 for lengths 2-16" if ok else f"failed lengths {bad}")
    assert ok


# ---------------------------------------------------------------- 7

def test_7_sample_sets():
    _vectors.cache_clear()
    spec = GridSpec(4)
    start = time.perf_counter()
    problems = []
    sizes = {}
    perimeter = [p.index(4) for p in perimeter_cycle(4)]
    vertex = [p.index(4) for p in corners(4)]
    for kind in KIND_ORDER:
        vectors = generate_sample_set(kind, spec).vectors
        sizes[kind.value] = len(vectors)
        if len({tuple(v) for v in vectors.tolist()}) != 576:
            problems.append(f"{kind.value} not 576 unique")
        if not np.array_equal(np.sort(vectors, axis=1), np.tile(np.arange(1, 17), (len(vectors), 1))):
            problems.append(f"{kind.value} has an invalid permutation")
        if kind is StrategyKind.PERIMETER_COMPLETE and not (vectors[:, perimeter] <= 12).all():
            problems.append("p-c perimeter ranks")
        if kind is StrategyKind.VERTICES_FIRST and not (vectors[:, vertex] <= 4).all():
            problems.append("v-f corner ranks")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 5.0
    record_acceptance(7, ok, f"sizes {sizes} in {elapsed:.2f} s" + (f"; {problems}" if problems else ""))
    assert ok


# ---------------------------------------------------------------- 8

def test_8_strategy_end_to_end():
    spec = GridSpec(4)
    outcomes = []
    for i, kind in enumerate(KIND_ORDER):
        sample = generate_sample_set(kind, spec)
        seq = PlacementSequence.from_vector(spec, sample.vectors[(97 * i + 13) % len(sample)])
        script = simulator.scripted_strategy_trial(spec, DESIGN_4, seq, 4)
        frames, truth = simulator.render_trial(script)
        det = detect_trial(frames, spec, Config(), dict(enumerate(truth.hand_boxes)))
        report = classify(derive_sequence(det.timeline))
        outcomes.append((kind, report.best_kind, report.scores[kind]))
    shuffled = PlacementSequence.from_vector(spec, np.random.default_rng(8).permutation(16) + 1)
    rep = classify(shuffled)
    shuffled_ok = rep.tie_flag or max(rep.scores.values()) < 1.0
    ok = all(k is best and score == 1.0 for k, best, score in outcomes) and shuffled_ok
    detail = ", ".join(f"{k.value}->{b.value}({s:.3f})" for k, b, s in outcomes)
    record_acceptance(8, ok, f"{detail}; shuffled max={max(rep.scores.values()):.3f} tie={rep.tie_flag}")
    assert ok


# ---------------------------------------------------------------- 9

def test_9_kmeans_k1_equals_averaging():
    rng = np.random.default_rng(9)
    disagreements = 0
    km, avg = KMeans(k=1), RgbAveraging()
    for _ in range(10_000):
        h, w = rng.integers(1, 8, size=2)
        quad = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        if rng.random() < 0.5:
            # bias some quadrants toward the threshold where rounding matters
            quad = np.clip(quad // 8 + 124, 0, 255).astype(np.uint8)
        if classify_quadrant(quad, km) is not classify_quadrant(quad, avg):
            disagreements += 1
    ok = disagreements == 0
    record_acceptance(9, ok, f"{disagreements} disagreements on 10000 random quadrants")
    assert ok


# ---------------------------------------------------------------- 10

def test_10_feature_oracle():
    spec = GridSpec(4)
    seq = PlacementSequence.from_order(spec, list(spec.positions()))
    base = simulator.scripted_strategy_trial(spec, DESIGN_4, seq, 4, hands=False)
    # (1,1) and (1,0) start as White and Red; the subject later exchanges them
    last = base.events[-1].frame
    swap = (simulator.Event(last + 6, CellPos(1, 0), F.WHITE), simulator.Event(last + 10, CellPos(1, 1), F.RED))
    script = simulator.TrialScript(spec, base.events + swap, geometry=base.geometry, n_frames=last + 20)
    frames, truth = simulator.render_trial(script)
    detected = detect_trial(frames, spec).timeline
    results = []
    for tl in (truth.timeline, detected):
        errors, _ = count_errors(tl)
        swaps, in_place = detect_swaps(tl)
        results.append((errors, swaps, in_place))
    fixture = [TrialPoint("a", "x", 1, 1.0), TrialPoint("b", "x", 3, 2.0), TrialPoint("c", "x", 2, 3.0)]
    r = pearson(fixture)
    ok = all(res == (2, 1, 0) for res in results) and abs(r - 0.5) <= 1e-12
    record_acceptance(10, ok, f"(errors, swaps, in_place) truth={results[0]} detected={results[1]}; pearson={r!r}")
    assert ok


# ---------------------------------------------------------------- 11

def test_11_svgs(tmp_path):
    docs = []
    for n in (2, 3, 4):
        spec = GridSpec(n)
        for seed in range(3):
            seq = PlacementSequence.from_vector(spec, np.random.default_rng(seed).permutation(n * n) + 1)
            docs.append(viz.sequence_heatmap(seq))
            docs.append(viz.sequence_heatmap(seq, np.full((n, n), F.NE)))
            if n in (3, 4):
                docs.append(viz.strategy_bars(classify(seq)))
    docs.append(viz.scatter([TrialPoint(f"p{i % 4}", f"d{i}", i * 2, 30.0 + 17 * i) for i in range(12)]))
    docs.append(viz.scatter([TrialPoint("solo", "d", 20, 200.0)]))
    # the CLI's own outputs
    out = tmp_path / "cli"
    assert main(["script", "--n", "3", "--frames-per-move", "3", "--out", str(tmp_path / "s.json")]) == 0
    assert main(["simulate", str(tmp_path / "s.json"), str(tmp_path / "f")]) == 0
    assert main(["analyze", str(tmp_path / "f" / "truth.json"), str(out), "--trials", str(tmp_path / "t.csv"),
                 "--participant", "p", "--puzzle", "d"]) == 0
    assert main(["viz", "scatter", str(tmp_path / "t.csv"), "--out", str(out / "scatter.svg")]) == 0
    files = sorted(out.glob("*.svg"))
    malformed = 0
    for doc in docs:
        try:
            ET.fromstring(doc.body.split("\n", 1)[1])
        except ET.ParseError:
            malformed += 1
    for path in files:
        try:
            ET.parse(path)
        except ET.ParseError:
            malformed += 1
    monotone_failures = 0
    for max_rank in (1, 4, 9, 16):
        for a, b in itertools.combinations(range(1, max_rank + 1), 2):
            la = sum(w * c for w, c in zip((0.2126, 0.7152, 0.0722), viz.gradient_rgb(a, max_rank)))
            lb = sum(w * c for w, c in zip((0.2126, 0.7152, 0.0722), viz.gradient_rgb(b, max_rank)))
            if not la > lb:
                monotone_failures += 1
    total = len(docs) + len(files)
    ok = malformed == 0 and monotone_failures == 0 and len(files) == 3
    record_acceptance(11, ok, f"{total - malformed}/{total} SVGs well-formed, {monotone_failures} gradient order violations")
    assert ok
