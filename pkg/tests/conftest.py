import pytest
from hypothesis import strategies as st

from tpnm.graph import EventSequence

START = 1_600_000_000


@st.composite
def sequences(draw, max_nodes=12, max_events=15, max_gap=3 * 86400):
    """A valid event sequence over nodes 1..n, returned with its catalog ids."""
    n = draw(st.integers(1, max_nodes))
    length = draw(st.integers(1, max_events))
    nodes = draw(st.lists(st.integers(1, n), min_size=length, max_size=length))
    gaps = draw(st.lists(st.integers(1, max_gap), min_size=length - 1, max_size=length - 1))
    t0 = draw(st.integers(0, 2 * START))
    times = [t0]
    for g in gaps:
        times.append(times[-1] + g)
    return EventSequence("h", tuple(zip(nodes, times))), tuple(range(1, n + 1))


_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    # a criterion may span several tests; it passes only if all of them do
    if report.when == "call" or report.failed:
        _, ok = _acceptance.get(number, (text, True))
        _acceptance[number] = (text, ok and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        text, ok = _acceptance[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}")
