import numpy as np
import pytest

from pmqld.cli import resolve_data
from pmqld.core import new_params
from pmqld.table import FrequencyTable

THETAS = (0.05, 0.3, 1.0, 3.0)


def _grid():
    # five (alpha, delta) shapes per theta; alpha = 1e-6 stands in for 0 and
    # alpha = -0.9 is only admissible together with delta = 1
    out = []
    for i, theta in enumerate(THETAS):
        shapes = [
            (-0.9, 1.0),
            (1e-6, 9.0 if i % 2 else 2.5),
            (0.5, 2.5),
            (2.0, 9.0),
            (2.0 if i % 2 else 0.5, 0.5),
        ]
        out.extend(new_params(theta, a, d) for a, d in shapes)
    return out


PARAM_GRID = _grid()


def grid_id(p):
    return f"t{p.theta:g}-a{p.alpha:g}-d{p.delta:g}"


@pytest.fixture(params=PARAM_GRID, ids=grid_id)
def grid_params(request):
    return request.param


def support_limit(params):
    """Count beyond which the remaining mass is negligible (about 60 sd past the mean)."""
    from pmqld.core import moments

    m = moments(params)
    return int(np.ceil(m.mean + 60 * np.sqrt(m.variance))) + 50


@pytest.fixture(scope="session")
def seizure():
    return resolve_data("seizure")


@pytest.fixture(scope="session")
def roots():
    return resolve_data("roots")


@pytest.fixture(scope="session")
def consumer_goods():
    return resolve_data("consumer_goods")


@pytest.fixture(scope="session")
def datasets(seizure, roots, consumer_goods):
    return {"seizure": seizure, "roots": roots, "consumer_goods": consumer_goods}


@pytest.fixture(scope="session")
def pmqld_fits(datasets):
    from pmqld.estimation import fit_mle

    return {k: fit_mle(t) for k, t in datasets.items()}


def small_table(seed=11, n=150, params=(0.3, 0.5, 2.5)):
    from pmqld.sampling import RandomSource, sample_pmqld_alg2

    draws = sample_pmqld_alg2(new_params(*params), n, RandomSource(seed))
    return FrequencyTable.from_observations(draws)

# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, title, checks):
        """Record criterion ``number`` from ``(label, ok, detail)`` checks and assert it."""
        ok = all(good for _, good, _ in checks)
        parts = [f"{label} {detail}" + ("" if good else " [miss]") for label, good, detail in checks]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} | " + "; ".join(parts)
        ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
