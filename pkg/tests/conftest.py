import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from spotlier import kernels  # noqa: E402

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.load_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def release():
    """The release-seed synthetic comparison (training, beta sweep, baselines)."""
    import time

    from spotlier import experiment

    start = time.perf_counter()
    result = experiment.compare_detectors()
    result.seconds = time.perf_counter() - start
    return result
