import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdtkit.core import (
    LABELS, BlockFace, CellPos, GridSpec, GridState, IncompleteSequence, PlacementSequence,
    Timeline, TransitionKind, face_transition_kind, rank_vector,
)

F = BlockFace
BLOCKS = [F.RED, F.WHITE, F.NW, F.NE, F.SW, F.SE]


def expected_kind(a, b):
    # equality wins over Invalid, so (Invalid, Invalid) is NoChange
    if a == b:
        return TransitionKind.NO_CHANGE
    if F.INVALID in (a, b):
        return TransitionKind.INVALID_INVOLVED
    if a == F.EMPTY:
        return TransitionKind.PLACEMENT
    if b == F.EMPTY:
        return TransitionKind.REMOVAL
    return TransitionKind.MODIFICATION


def test_labels():
    assert LABELS == ("Empty", "Red", "White", "NW", "NE", "SW", "SE", "Invalid")
    for f in F:
        assert F.parse(f.label) is f
    with pytest.raises(ValueError):
        F.parse("Blue")


def test_transition_examples():
    assert face_transition_kind(F.EMPTY, F.NW) is TransitionKind.PLACEMENT
    assert face_transition_kind(F.NW, F.NE) is TransitionKind.MODIFICATION
    assert face_transition_kind(F.RED, F.INVALID) is TransitionKind.INVALID_INVOLVED


def test_transition_total_over_64_pairs():
    pairs = list(itertools.product(F, F))
    assert len(pairs) == 64
    for a, b in pairs:
        assert face_transition_kind(a, b) is expected_kind(a, b)


def test_rank_vector_examples():
    s = GridSpec(2)
    assert rank_vector(PlacementSequence(s, [[1, 2], [3, 4]])) == [1, 2, 3, 4]
    assert rank_vector(PlacementSequence(s, [[4, 3], [2, 1]])) == [4, 3, 2, 1]
    with pytest.raises(IncompleteSequence):
        rank_vector(PlacementSequence(s, [[1, 0], [2, 3]]))


@given(st.permutations(range(1, 10)))
def test_rank_vector_inverse(perm):
    s = GridSpec(3)
    seq = PlacementSequence.from_vector(s, perm)
    assert rank_vector(seq) == list(perm)
    assert PlacementSequence.from_vector(s, rank_vector(seq)) == seq


def test_from_order_and_order():
    s = GridSpec(2)
    seq = PlacementSequence.from_order(s, [(1, 1), (0, 0), (0, 1), (1, 0)])
    assert rank_vector(seq) == [2, 3, 4, 1]
    assert seq.order() == [CellPos(1, 1), CellPos(0, 0), CellPos(0, 1), CellPos(1, 0)]


def test_competition_ranking_enforced():
    s = GridSpec(2)
    PlacementSequence(s, [[1, 1], [3, 4]])
    with pytest.raises(ValueError):
        PlacementSequence(s, [[1, 1], [2, 3]])
    with pytest.raises(ValueError):
        PlacementSequence(s, [[1, 2], [2, 5]])


def test_order_ties_row_major():
    seq = PlacementSequence(GridSpec(2), [[3, 1], [1, 0]])
    assert seq.order() == [CellPos(0, 1), CellPos(1, 0), CellPos(0, 0)]
    assert not seq.complete
    assert seq.rank(CellPos(1, 1)) is None


def test_gridspec():
    s = GridSpec(4, Fraction(30000, 1001))
    assert s.cells == 16
    assert (s.image_width, s.image_height) == (640, 480)
    assert s.seconds(30) == pytest.approx(1.001)
    assert list(s.positions())[:2] == [CellPos(0, 0), CellPos(0, 1)]
    with pytest.raises(ValueError):
        GridSpec(1)


def test_timeline_invariants():
    s = GridSpec(2)
    empty = np.zeros((2, 2), dtype=np.uint8)
    with pytest.raises(ValueError):
        Timeline(s, [0, 2], [empty, empty])
    with pytest.raises(ValueError):
        Timeline(s, [1, 1], [empty, empty], sparse=True)
    tl = Timeline(s, [3, 7], [empty, empty], sparse=True)
    assert len(tl) == 2
    with pytest.raises(ValueError):
        tl.faces[0, 0, 0] = 1


def test_timeline_from_states_and_labels():
    s = GridSpec(2)
    tl = Timeline.from_labels(s, [[["Empty", "Red"], ["NW", "Invalid"]], [[F.RED, F.RED], [F.NW, F.EMPTY]]])
    assert tl.track(CellPos(0, 1)).tolist() == [F.RED, F.RED]
    again = Timeline.from_states(s, tl.states)
    assert again == tl
    assert tl.states[1] == GridState(1, tl.faces[1])


def test_derive_competition_example():
    # ranks for two ties then one later: 1, 1, 3
    seq = PlacementSequence(GridSpec(2), [[1, 1], [3, 0]])
    assert sorted(int(r) for r in seq.ranks.reshape(-1) if r) == [1, 1, 3]
