import numpy as np
import pytest

from matnet.datagen import Dataset, SamplingConfig, sample_orthotropic
from matnet.network import Topology, forward_batch
from matnet.training import init_params

# lines reported by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(model_type, depth, rng, dead=0):
    """Random network; ``dead`` base nodes get a negative activation."""
    p = init_params(model_type, Topology(depth), rng)
    if dead:
        idx = rng.permutation(p.z.size)[:dead]
        p.z[idx] = -rng.uniform(0.01, 0.1, dead)
    return p


def random_phases(rng, n, isotropic=False):
    cfg = SamplingConfig(isotropic=isotropic)
    return (np.array([sample_orthotropic(cfg, rng) for _ in range(n)]),
            np.array([sample_orthotropic(cfg, rng) for _ in range(n)]))


def teacher_dataset(teacher, rng, n, isotropic=False):
    Cp1, Cp2 = random_phases(rng, n, isotropic)
    C = forward_batch(teacher, Cp1, Cp2)
    return Dataset(Cp1, Cp2, 0.5 * (C + np.swapaxes(C, 1, 2)), "test", 0)
