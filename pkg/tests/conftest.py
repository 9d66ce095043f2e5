import numpy as np
import pytest

from bdtkit.core import BlockFace, GridSpec

F = BlockFace

DESIGN_4 = [
    [F.NW, F.RED, F.RED, F.NE],
    [F.RED, F.WHITE, F.WHITE, F.RED],
    [F.RED, F.WHITE, F.WHITE, F.RED],
    [F.SW, F.RED, F.RED, F.SE],
]

DESIGN_3 = [
    [F.RED, F.NE, F.WHITE],
    [F.SW, F.RED, F.NW],
    [F.WHITE, F.SE, F.RED],
]


@pytest.fixture
def spec4():
    return GridSpec(4)


@pytest.fixture
def spec3():
    return GridSpec(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE_RESULTS[number] = f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_RESULTS[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
