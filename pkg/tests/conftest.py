import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = pytest.StashKey[list]()


def load_preset(name):
    from harvestsim.cli import preset_path
    from harvestsim.io import load_scenario
    return load_scenario(preset_path(name)).scenario


@pytest.fixture(scope="session")
def preset():
    return load_preset


def _timed_run(sc, **kw):
    from harvestsim.scenarios import run
    start = time.perf_counter()
    res = run(sc, **kw)
    res.metadata["wall_s"] = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def fig8_run():
    """The full 10 s charging run, shared by every test that needs it."""
    return _timed_run(load_preset("fig8"))


@pytest.fixture(scope="session")
def fig7_open_run():
    from harvestsim.scenarios import OpenLoad
    sc = load_preset("fig7")
    return _timed_run(sc.model_copy(update={"load": OpenLoad()}))


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the end-of-session summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
