import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kpbms.fixtures import make_fixture_set  # noqa: E402


def random_map(rng, shape=(32, 32), density=None):
    p = rng.uniform(0.3, 0.7) if density is None else density
    return rng.random(shape) < p


@pytest.fixture(scope="session")
def clean_scenes():
    return make_fixture_set(200, "clean", seed=11)


@pytest.fixture(scope="session")
def hard_scenes():
    return make_fixture_set(200, "hard", seed=12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status:4s} criterion {key}: {detail}")
