import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fgs.dataset import Dataset
from fgs.forest import ForestConfig
from fgs.simulate import SimDesign, generate
from fgs.smoother import fit_fgs

settings.register_profile(
    "fgs",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("fgs")

SMALL_FOREST = ForestConfig(num_trees=50, seed=3)


@pytest.fixture(scope="session")
def mu2_data() -> Dataset:
    return generate(SimDesign("sigmoid_mu2", 400, 5.0, 11))


@pytest.fixture(scope="session")
def mu2_model(mu2_data):
    return fit_fgs(mu2_data, SMALL_FOREST, split_seed=5)


@pytest.fixture(scope="session")
def affine_data() -> Dataset:
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(300, 3))
    return Dataset(X, 2.0 + X @ np.array([1.5, -0.5, 3.0]))


@pytest.fixture(scope="session")
def affine_model(affine_data):
    return fit_fgs(affine_data, SMALL_FOREST, split_seed=2)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_VERDICTS, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
