import numpy as np
import pytest

from cqcoding.channels import CqChannel, InputDistribution
from cqcoding.operators import projector, random_density_matrix


def qubit_ray(theta: float) -> np.ndarray:
    """Pure qubit state cos(theta)|0> + sin(theta)|1>."""
    return projector(np.array([np.cos(theta), np.sin(theta)]))


def random_channel(rng, n_inputs: int, dim: int, rank=None) -> CqChannel:
    return CqChannel.from_states([random_density_matrix(dim, rng, rank) for _ in range(n_inputs)])


def random_distribution(rng, n: int) -> InputDistribution:
    return InputDistribution.from_weights([str(i) for i in range(n)], rng.dirichlet(np.ones(n)))


def gen(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@pytest.fixture
def rng():
    return gen(20240611)


ZERO = np.diag([1.0, 0.0]).astype(complex)
ONE = np.diag([0.0, 1.0]).astype(complex)
PLUS = projector(np.array([1.0, 1.0]) / np.sqrt(2))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
