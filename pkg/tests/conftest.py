import pytest

from ttslabel.dictionary import G2pDictionary
from ttslabel.labels import Vocabulary

ACCEPTANCE_RESULTS = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture
def kagaku_dict():
    return G2pDictionary({"化学": [("ka", "ga", "ku"), ("ba", "ke", "ga", "ku")]})


@pytest.fixture
def split_dict():
    return G2pDictionary({"化": [("ka",), ("ba", "ke")], "学": [("ga", "ku")]})


@pytest.fixture
def kagaku_vocab():
    return Vocabulary(["ka", "ba", "ke", "ga", "ku", "_", "[", "]", "#", "?"])
