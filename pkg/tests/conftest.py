import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance_line(capsys):
    """Record (and print) the one-line verdict of an acceptance criterion."""

    def record(number: int, name: str, passed: bool, detail: str = ""):
        line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {name}"
        if detail:
            line += f" :: {detail}"
        _ACCEPTANCE[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
