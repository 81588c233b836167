import itertools

import numpy as np
import pytest

from trusteval.geometry import ShapeSet
from trusteval.setmetrics import TrackSet


def random_boxes(rng, n, lo=0.0, hi=30.0, size=(2.0, 15.0)):
    xy = rng.uniform(lo, hi, (n, 2))
    wh = rng.uniform(*size, (n, 2))
    return np.hstack([xy, xy + wh])


def random_set(rng, n, scores=False, **kw):
    s = rng.uniform(0.05, 1.0, n) if scores else None
    return ShapeSet.from_boxes(random_boxes(rng, n, **kw), s)


def random_trackset(rng, n, window, hi=20.0):
    boxes = np.full((n, window, 4), np.nan)
    for i in range(n):
        alive = rng.random(window) < 0.7
        if not alive.any():
            alive[rng.integers(window)] = True
        boxes[i, alive] = random_boxes(rng, int(alive.sum()), hi=hi)
    return TrackSet(list(range(n)), boxes, np.arange(1, window + 1))


def brute_force_assignment(c):
    """Cheapest matching of size min(m, n) by enumerating injections."""
    c = np.asarray(c, float)
    m, n = c.shape
    if m <= n:
        return min(sum(c[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m))
    return brute_force_assignment(c.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ---------------------------------------------------------------------------
# one PASS/FAIL line per acceptance criterion in the terminal summary

_criteria: dict = {}
_notes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or not (rep.when == "call" or rep.failed):
        return
    number, title = m.args
    ok = _criteria.get(number, (title, True))[1]
    _criteria[number] = (title, ok and rep.passed)


@pytest.fixture
def note(request):
    """Attach a short measured-value line to the criterion's summary."""
    number = request.node.get_closest_marker("criterion").args[0]

    def add(text):
        _notes.setdefault(number, []).append(text)
    return add


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
        for text in _notes.get(number, []):
            tr.write_line(f"    {text}")
