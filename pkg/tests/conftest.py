import numpy as np
import pytest

from ddpgp.model import ModelState, stick_weights
from ddpgp.simulation import ScenarioSpec, generate_scenario


def random_state(k, n, rng, p=2, spread=1.0):
    """A valid mixture state with random locations (no data attached)."""
    v = rng.uniform(0.2, 0.8, k)
    v[-1] = 1.0
    sigma = np.array([[1.0, 0.5], [0.5, 1.5]])
    return ModelState(
        v=v, w=stick_weights(v), theta=rng.normal(0, spread, (k, 2, n)) + np.array([0.0, 1.0])[None, :, None],
        beta=rng.normal(0, 1, (k, 2, p)), sigma=sigma, alpha=1.0,
        gamma=np.zeros(n, dtype=int), y=np.zeros((n, 2)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_dataset():
    ds, _ = generate_scenario(ScenarioSpec(1, n=60, seed=3))
    return ds


# --------------------------------------------------------------------------
# one summary line per acceptance criterion

_CRITERIA = {}


def pytest_runtest_logreport(report):
    crit = _CRITERIA.get(report.nodeid)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        crit["outcomes"].append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CRITERIA[item.nodeid] = {"number": m.args[0], "text": m.args[1], "outcomes": []}


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    by_number = {}
    for crit in _CRITERIA.values():
        entry = by_number.setdefault(crit["number"], {"text": crit["text"], "outcomes": []})
        entry["outcomes"].extend(crit["outcomes"] or ["not run"])
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        outs = by_number[number]["outcomes"]
        status = "PASS" if all(o == "passed" for o in outs) else (
            "NOT RUN" if all(o in ("not run", "skipped") for o in outs) else "FAIL")
        terminalreporter.write_line(f"criterion {number}: {status:7s} {by_number[number]['text']}")
