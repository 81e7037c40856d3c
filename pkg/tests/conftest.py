"""Shared fixtures.

Every call to ``fit_emgm`` made anywhere in the suite (directly, through the
regression and spectroscopy modules, or through the in-process CLI) is
checked for a decreasing log-likelihood trace.
"""
import numpy as np
import pytest

from emglab import em, regression, spectro

MONO_TOL = 1e-9


class GemMonitor:
    def __init__(self):
        self.fits = 0
        self.violations = []

    def check(self, trace):
        self.fits += 1
        d = np.diff(np.asarray(trace))
        if d.size and d.min() < -MONO_TOL:
            self.violations.append(float(d.min()))
            return False
        return True


MONITOR = GemMonitor()


@pytest.fixture(scope="session", autouse=True)
def _watch_gem():
    original = em.fit_emgm

    def watched(*args, **kwargs):
        res = original(*args, **kwargs)
        assert MONITOR.check(res.trace), f"log-likelihood decreased by {-MONITOR.violations[-1]:g}"
        return res

    mp = pytest.MonkeyPatch()
    for mod in (em, regression, spectro):
        mp.setattr(mod, "fit_emgm", watched)
    yield MONITOR
    mp.undo()


@pytest.fixture
def gem_monitor(_watch_gem):
    return _watch_gem


# acceptance criteria run last so that the monotonicity criterion sees every
# fit made by the rest of the suite; each prints one verdict line at the end

ACCEPTANCE_DETAILS = {}


def pytest_collection_modifyitems(session, config, items):
    def key(item):
        acc = item.nodeid.startswith("tests/test_acceptance.py") or "test_acceptance.py" in item.nodeid
        last = acc and "monoton" in item.name
        return (acc, last)
    items.sort(key=key)


@pytest.fixture
def record(request):
    def _record(detail):
        ACCEPTANCE_DETAILS[request.node.name] = detail
    return _record


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_c" not in nodeid or rep.when not in ("call", "setup"):
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            name = nodeid.split("::")[-1]
            num = int(name[len("test_c"):].split("_")[0])
            rows.append((num, "PASS" if outcome == "passed" else "FAIL", name))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num, verdict, name in sorted(rows):
        detail = ACCEPTANCE_DETAILS.get(name, "")
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {name}  {detail}")
