import pytest

from lcforecast.data_model import EventLog, EventRecord, ParticipantProfile
from lcforecast.synthgen import CommunityConfig, generate


def couple_profiles(n_couples: int = 2, **attrs) -> dict[str, ParticipantProfile]:
    out = {}
    for i in range(n_couples):
        a, b = f"p{2 * i + 1:02d}", f"p{2 * i + 2:02d}"
        out[a] = ParticipantProfile(a, partner=b, **attrs)
        out[b] = ParticipantProfile(b, partner=a, **attrs)
    return out


@pytest.fixture
def toy_log() -> EventLog:
    """Ten events for p01 plus one for p02, used for hand-counted feature checks."""
    ev = [
        EventRecord(100, "p01", "call", direction="outgoing", duration_s=30, peer="h_aa"),
        EventRecord(200, "p01", "call", direction="outgoing", duration_s=40, peer="h_aa"),
        EventRecord(300, "p01", "sms", direction="incoming", peer="h_bb"),
        EventRecord(400, "p01", "sms", direction="incoming", peer="h_bb"),
        EventRecord(500, "p01", "sms", direction="incoming", peer="h_cc"),
        EventRecord(600, "p01", "alarm", action="set"),
        EventRecord(700, "p01", "search"),
        EventRecord(800, "p01", "app_install", app="maps"),
        EventRecord(900, "p01", "bluetooth", peer="d_p02"),
        EventRecord(1000, "p01", "call", direction="missed", duration_s=0, peer="h_dd"),
        EventRecord(1100, "p02", "wifi", peer="w_home"),
    ]
    return EventLog(tuple(ev), couple_profiles(1))


@pytest.fixture(scope="session")
def default_run():
    """The default 70-couple, 30-day synthetic community and its event log."""
    return generate(CommunityConfig())


ACCEPTANCE_LINES: list[tuple[float, str]] = []


@pytest.fixture
def verdict():
    """Record one acceptance line, print it, and fail the test if it did not pass."""

    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
        assert ok, line

    def info(n: int, detail: str) -> None:
        line = f"criterion {n:>2}: info  {detail}"
        ACCEPTANCE_LINES.append((n + 0.5, line))
        print(line)

    record.info = info
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
            terminalreporter.write_line(line)
