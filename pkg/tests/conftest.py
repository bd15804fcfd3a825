import numpy as np
import pytest

from loadcast.fleet import default_fleet
from loadcast.sampling import FullInstance, InstanceSketch


@pytest.fixture(scope="session")
def fleet():
    return default_fleet()


def make_instance(railcars, w40=(), w53=()):
    """Instance from a {type_id: count} map and gross weights per length."""
    counts = [0] * 10
    for t, n in railcars.items():
        counts[t - 1] = n
    sk = InstanceSketch(tuple(counts), (len(w40), len(w53)))
    return FullInstance(sk, (np.array(w40, dtype=float), np.array(w53, dtype=float)))


# criterion number -> (passed, description, detail); filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, what, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {n:>2}. {what}: {detail}")
