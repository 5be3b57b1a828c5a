import numpy as np
import pytest

from fdri.images import load_bundled_images


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bundled_128():
    return load_bundled_images((128, 128))


@pytest.fixture(scope="session")
def bundled_64():
    return load_bundled_images((64, 64))


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
