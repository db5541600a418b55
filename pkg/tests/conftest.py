import numpy as np
import pytest

from pixel_rsma.channel import ScenarioConfig, substream, synth_pixel_hardware
from pixel_rsma.em_model import ImpedanceNetwork, PatternCoderBank


@pytest.fixture
def toy_net():
    """Two pixel ports with Z_PP = [[2, 1], [1, 2]] and unit couplings."""
    return ImpedanceNetwork(z_AA=1.0, Z_PP=np.array([[2.0, 1.0], [1.0, 2.0]]),
                            z_PA=np.array([1.0, 1.0]))


def make_bank(Q=6, Ns=8, seed=0):
    cfg = ScenarioConfig(Q=Q, Ns=Ns)
    net, patterns = synth_pixel_hardware(cfg, substream(seed, 0))
    return PatternCoderBank(net, patterns)


@pytest.fixture(scope="session")
def small_bank():
    return make_bank()


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and assert it."""
    def record(number, name, passed, detail):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        print(line)
        assert passed, line
    return record
