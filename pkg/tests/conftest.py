import numpy as np
import pytest

from latticeshaping import _backend

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = [_backend.python_kernels] + ([_backend.compiled_kernels] if _backend.compiled_kernels else [])


@pytest.fixture(params=BACKENDS, ids=lambda k: k.BACKEND)
def any_kernels(request):
    return request.param
