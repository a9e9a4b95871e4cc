import numpy as np
import pytest

from morpho2r.config import build_config
from morpho2r.harness import run_timed


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Full-length experiment runs are expensive (minutes), so each task is run
# once per session and shared by every module that inspects the outputs.
_RUNS: dict = {}
TIMINGS: dict = {}


def _full_run(task: str, tmp_path_factory):
    if task not in _RUNS:
        out = tmp_path_factory.mktemp(f"full_{task}")
        _RUNS[task], TIMINGS[task] = run_timed(build_config(task, out=out))
    return _RUNS[task]


@pytest.fixture(scope="session")
def circle_run(tmp_path_factory):
    return _full_run("circle", tmp_path_factory)


@pytest.fixture(scope="session")
def ellipse_run(tmp_path_factory):
    return _full_run("ellipse", tmp_path_factory)


@pytest.fixture(scope="session")
def rect_run(tmp_path_factory):
    return _full_run("rect", tmp_path_factory)


@pytest.fixture(scope="session")
def run_timings():
    return TIMINGS


# --- acceptance reporting ----------------------------------------------------

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        store[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
