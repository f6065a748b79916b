import pytest

_LINES: dict[int, str] = {}


class _Recorder:
    def __call__(self, number: int, title: str, ok: bool, detail: str = "") -> bool:
        _LINES[number] = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        return ok


@pytest.fixture
def criterion():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
