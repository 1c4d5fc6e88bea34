import numpy as np
import pytest

from uasplan.bench import default_matrix, run_matrix
from uasplan.grid import OccupancyGrid
from uasplan.pipeline import PipelineConfig, build_pipeline


def random_grid(rng, max_xy=15, max_z=8, occupancy=0.3, cell_xy=1.0, cell_z=1.0):
    shape = (int(rng.integers(1, max_xy + 1)), int(rng.integers(1, max_xy + 1)), int(rng.integers(1, max_z + 1)))
    return OccupancyGrid(rng.random(shape) < occupancy, cell_xy, cell_z)


def random_free_cell(rng, grid):
    free = np.argwhere(~grid.occupied)
    if len(free) == 0:
        return None
    return tuple(int(v) for v in free[rng.integers(len(free))])


@pytest.fixture(scope="session")
def default_pipeline():
    return build_pipeline(PipelineConfig())


@pytest.fixture(scope="session")
def default_records(default_pipeline):
    cases = default_matrix(default_pipeline.coarse, default_pipeline.config.coarsen_factor)
    return run_matrix(default_pipeline.fine, default_pipeline.coarse, cases, repetitions=5)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    if report.failed:
        reason = str(report.longrepr).strip().splitlines()[-1] if report.longrepr else ""
        _ACCEPTANCE[number] = (title, "FAIL", reason[:160])
    elif report.when == "call":
        _ACCEPTANCE[number] = (title, "PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} [{verdict}] {title}" + (f": {detail}" if detail else ""))
