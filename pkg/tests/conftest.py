import pytest

from incnet.graph import AttributedGraph


@pytest.fixture
def write(tmp_path):
    """Write text to a fresh file under tmp_path and return its path."""
    counter = iter(range(10_000))

    def _write(text: str, name: str | None = None):
        path = tmp_path / (name or f"input{next(counter)}.txt")
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def triangle():
    return AttributedGraph.from_edges(["a", "b", "c"], [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
