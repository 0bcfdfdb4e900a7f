import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qtsvd.harness import gen_tensor
from qtsvd.tensor import Tensor3

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


def random_tensor(dims, seed, complex_=False, normalize=False) -> Tensor3:
    rng = np.random.default_rng(seed)
    a = rng.random(dims)
    if complex_:
        a = a + 1j * rng.random(dims)
    t = Tensor3(a)
    return t.normalize() if normalize else t


@pytest.fixture
def rt():
    return random_tensor


@pytest.fixture
def philox():
    return gen_tensor


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
