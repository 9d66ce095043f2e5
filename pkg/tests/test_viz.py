import itertools
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from bdtkit import viz
from bdtkit.core import GridSpec, IncompleteSequence, PlacementSequence
from bdtkit.features import TrialPoint
from bdtkit.strategy import KIND_ORDER, Measure, StrategyKind, StrategyReport, classify

from conftest import DESIGN_4

NS = {"s": viz.SVG_NS}
GOLDEN = Path(__file__).parent / "golden"


def parse(doc):
    return ET.fromstring(doc.body.split("\n", 1)[1])


def luminance(rgb):
    r, g, b = rgb
    return 0.2126 * r + 0.7152 * g + 0.0722 * b


def hex_rgb(s):
    return tuple(int(s[i:i + 2], 16) for i in (1, 3, 5))


def canonical(text):
    return ET.canonicalize(text, strip_text=True)


# ---------------------------------------------------------------- gradient

def test_gradient_endpoints_and_midpoint():
    assert viz.gradient_rgb(1, 16) == viz.LIGHTEST_GREEN
    assert viz.gradient_rgb(16, 16) == viz.DARKEST_GREEN
    mid = viz.gradient_rgb(1, 1)
    assert mid == tuple(round((a + b) / 2) for a, b in zip(viz.LIGHTEST_GREEN, viz.DARKEST_GREEN))


def test_gradient_monotone_all_pairs():
    for max_rank in (4, 9, 16):
        for a, b in itertools.combinations(range(1, max_rank + 1), 2):
            assert luminance(viz.gradient_rgb(a, max_rank)) > luminance(viz.gradient_rgb(b, max_rank))


# ---------------------------------------------------------------- heatmap

def heat_fills(doc):
    rects = parse(doc).findall("s:g[@id='sequence']/s:rect", NS)
    return {int(r.get("data-rank")): r.get("fill") for r in rects}, rects


def test_heatmap_colors():
    seq = PlacementSequence.from_vector(GridSpec(4), range(1, 17))
    fills, rects = heat_fills(viz.sequence_heatmap(seq, DESIGN_4))
    assert len(rects) == 16
    assert hex_rgb(fills[1]) == viz.LIGHTEST_GREEN
    assert hex_rgb(fills[16]) == viz.DARKEST_GREEN
    tied = PlacementSequence(GridSpec(2), [[1, 1], [3, 4]])
    _, rects = heat_fills(viz.sequence_heatmap(tied))
    assert rects[0].get("fill") == rects[1].get("fill")
    with pytest.raises(IncompleteSequence):
        viz.sequence_heatmap(PlacementSequence(GridSpec(2), [[1, 0], [2, 3]]))


def test_heatmap_golden():
    seq = PlacementSequence.from_vector(GridSpec(4), range(1, 17))
    doc = viz.sequence_heatmap(seq, DESIGN_4)
    assert canonical(doc.body) == canonical((GOLDEN / "heatmap_row_major.svg").read_text(encoding="utf-8"))


# ---------------------------------------------------------------- bars

def report(scores, measure=Measure.TAU, tie=False, best=StrategyKind.ROW_BY_ROW):
    return StrategyReport(measure, dict(zip(KIND_ORDER, scores)), best, tie, {k: 576 for k in KIND_ORDER})


def bars(doc):
    return parse(doc).findall("s:g[@id='bars']/s:rect", NS)


def test_bars_all_equal():
    doc = viz.strategy_bars(report([0.5] * 5, tie=True))
    rects = bars(doc)
    assert len({r.get("height") for r in rects}) == 1
    assert rects[0].get("fill") == viz.BEST_COLOR
    assert all(r.get("fill") == viz.NEUTRAL_COLOR for r in rects[1:])
    assert parse(doc).find("s:text[@id='tie']", NS) is not None


def test_bars_best_is_red_and_tallest():
    seq = PlacementSequence.from_vector(GridSpec(4), range(1, 17))
    rects = bars(viz.strategy_bars(classify(seq)))
    tallest = max(rects, key=lambda r: float(r.get("height")))
    assert tallest.get("fill") == viz.BEST_COLOR
    assert tallest.get("data-kind") == "r-r"


def test_bars_tau_endpoints():
    rects = bars(viz.strategy_bars(report([1.0, -1.0, 0.0, 0.2, 0.3])))
    assert float(rects[1].get("height")) == 0.0
    assert float(rects[2].get("height")) == pytest.approx(float(rects[0].get("height")) / 2, abs=0.01)
    assert parse(viz.strategy_bars(report([1.0, -1.0, 0.0, 0.2, 0.3]))).find("s:text[@id='tie']", NS) is None


def test_bars_missing_kind():
    rep = StrategyReport(Measure.EUCLID, {StrategyKind.ROW_BY_ROW: 1.0}, StrategyKind.ROW_BY_ROW, False, {})
    rects = bars(viz.strategy_bars(rep))
    assert rects[2].get("data-score") == "n/a"


# ---------------------------------------------------------------- scatter

def circles(doc):
    return parse(doc).findall("s:g[@id='points']/s:circle", NS)


def test_scatter_single_point_inside():
    doc = viz.scatter([TrialPoint("a", "p1", 3, 40.0)])
    (c,) = circles(doc)
    assert 50 < float(c.get("cx")) < doc.width - 110
    assert 20 < float(c.get("cy")) < doc.height - 40


def test_scatter_colors_and_outlier():
    pts = [TrialPoint("a", "p1", 2, 60.0), TrialPoint("b", "p1", 5, 90.0), TrialPoint("a", "p2", 20, 200.0)]
    doc = viz.scatter(pts)
    cs = circles(doc)
    assert len({c.get("fill") for c in cs}) == 2
    assert cs[0].get("fill") == cs[2].get("fill")
    for c in cs:
        assert 0 <= float(c.get("cx")) <= doc.width
        assert 0 <= float(c.get("cy")) <= doc.height
    with pytest.raises(ValueError):
        viz.scatter([])


def test_all_documents_are_xml(tmp_path):
    seq = PlacementSequence.from_vector(GridSpec(3), np.random.default_rng(5).permutation(9) + 1)
    docs = [viz.sequence_heatmap(seq), viz.sequence_heatmap(seq, [[1, 2, 3], [4, 5, 6], [1, 1, 2]]),
            viz.strategy_bars(classify(seq)), viz.strategy_bars(classify(seq, measure=Measure.EUCLID)),
            viz.scatter([TrialPoint(f"p{i}", "x", i, 10.0 + i) for i in range(15)])]
    for i, doc in enumerate(docs):
        path = tmp_path / f"{i}.svg"
        doc.save(path)
        root = ET.parse(path).getroot()
        assert root.tag == f"{{{viz.SVG_NS}}}svg"
        assert "href" not in path.read_text()
