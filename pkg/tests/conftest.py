import pytest

from veritas.graph import SocialGraph

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for the acceptance summary, then assert."""

    def check(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def triangle():
    return SocialGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def path5():
    return SocialGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
