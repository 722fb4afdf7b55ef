import pytest

from bimotion.circuit import CircuitParams, build_bidirectional, build_prototype_pair, default_plan

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def plan():
    return default_plan()


@pytest.fixture
def params():
    return CircuitParams()


@pytest.fixture
def bi5(plan):
    return build_bidirectional(5, plan)


@pytest.fixture
def pair5(plan):
    return build_prototype_pair(5, plan)


@pytest.fixture
def criterion():
    """Record one acceptance line; the assertion still decides pass/fail."""
    entries = []

    def record(label: str, ok: bool, detail: str = "") -> None:
        entries.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"

    yield record
    _ACCEPTANCE.extend(entries)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
