import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from phtorus import holonomy as hol
from phtorus import torus_dynamics as td

settings.register_profile("phtorus", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("phtorus")

CAT = [[2, 1], [1, 1]]


@pytest.fixture(scope="session")
def cat():
    return td.make_linear_anosov(CAT)


@pytest.fixture(scope="session")
def cat_std0(cat):
    return td.make_product(cat, td.make_standard_map(0.0))


@pytest.fixture(scope="session")
def cat_std01(cat):
    return td.make_product(cat, td.make_standard_map(0.1))


@pytest.fixture(scope="session")
def cat_rot90(cat):
    return td.make_product(cat, td.make_linear_automorphism([[0, -1], [1, 0]]))


@pytest.fixture(scope="session")
def homoclinic(cat_std01):
    return hol.find_homoclinic_su_path(cat_std01, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(name: str, passed: bool, detail: str = ""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
