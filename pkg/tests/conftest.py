import pytest

from hrgkit.graphcore import Graph
from hrgkit.treedecomp import TreeDecomposition

# Four-bag decomposition shaped like the worked extraction example:
# bag 2 = {2,3,4,5} under a parent holding {3,4,5}, with one child {1,2,5}.
FIG_EDGES = [(0, 6), (3, 6), (4, 6), (5, 6), (3, 4), (4, 5), (2, 3), (2, 4), (1, 2), (1, 5)]
FIG_BAGS = (frozenset({3, 4, 5, 6}), frozenset({0, 6}), frozenset({2, 3, 4, 5}), frozenset({1, 2, 5}))
FIG_PARENT = (None, 0, 0, 2)


@pytest.fixture
def fig_graph():
    return Graph.from_edges(FIG_EDGES)


@pytest.fixture
def fig_td():
    return TreeDecomposition(FIG_BAGS, FIG_PARENT, 0)


@pytest.fixture
def triangle():
    return Graph.from_edges([(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path4():
    return Graph.from_edges([(0, 1), (1, 2), (2, 3)])


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _acceptance[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split("_")[1][1:]) if s.split("_")[1][1:].isdigit() else 99):
        terminalreporter.write_line(f"{_acceptance[name]}  {name}")
