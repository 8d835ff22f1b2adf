import numpy as np
import pytest

from hess_codesign import fis
from hess_codesign.cycle import synthesize_test_cycle

# criterion number -> (description, [outcomes])
ACCEPTANCE: dict[int, tuple[str, list[tuple[str, bool]]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion this test checks")
    config.addinivalue_line("markers", "slow: long-running end-to-end test")


def pytest_runtest_makereport(item, call):
    if call.when != "call" and not (call.when == "setup" and call.excinfo is not None):
        return
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    entry = ACCEPTANCE.setdefault(n, (text, []))
    entry[1].append((item.name, call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        text, outcomes = ACCEPTANCE[n]
        ok = all(passed for _, passed in outcomes)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
        for name, passed in outcomes:
            tr.write_line(f"    {'pass' if passed else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def template():
    return fis.default_template()


@pytest.fixture(scope="session")
def short_cycle():
    return synthesize_test_cycle(duration=60.0, seed=1)


@pytest.fixture(scope="session")
def desk_cycle():
    return synthesize_test_cycle()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
