import numpy as np
import pytest

from graf import backend
from graf.dataset import Dataset

# One line per acceptance check, echoed after the test summary so the
# PASS/FAIL verdicts survive output capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_dataset(seed, n_max=60, d_max=6, c_max=3, balanced=False):
    """Small random dataset for property-style checks.

    With ``balanced=True`` every class gets the same number of samples
    (n is rounded down to a multiple of the class count).
    """
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, d_max + 1))
    c = int(rng.integers(2, c_max + 1))
    if balanced:
        per = max(1, int(rng.integers(2, n_max // c + 1)))
        labels = np.repeat(np.arange(1, c + 1), per)
        n = labels.size
    else:
        n = int(rng.integers(c, n_max + 1))
        labels = np.concatenate([
            np.arange(1, c + 1),                      # every class present
            rng.integers(1, c + 1, size=n - c),
        ])
    x = rng.normal(size=(n, d))
    return Dataset(x, labels.astype(np.int64), n_classes=c)


@pytest.fixture(params=backend.available())
def each_backend(request):
    """Run a test once per available compute backend."""
    prev = backend.use(request.param)
    yield request.param
    backend.use(prev)


@pytest.fixture
def compiled_only():
    if "compiled" not in backend.available():
        pytest.skip("compiled backend not built")
    prev = backend.use("compiled")
    yield
    backend.use(prev)
