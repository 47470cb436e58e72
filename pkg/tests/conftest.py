import pytest

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Record a criterion outcome for the summary, then assert it."""

    def _record(cid: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[cid] = (bool(ok), detail)
        assert ok, f"{cid}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'} {detail}")
