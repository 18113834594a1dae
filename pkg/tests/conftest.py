import numpy as np
import pytest

from vlhmm.context_tree import ContextTree
from vlhmm.pipeline import SCENARIO_TREES, _binary_tree


@pytest.fixture
def scenario1_tree() -> ContextTree:
    return _binary_tree(SCENARIO_TREES["scenario_1"])


@pytest.fixture
def scenario2_tree() -> ContextTree:
    return _binary_tree(SCENARIO_TREES["scenario_2"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> str:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
