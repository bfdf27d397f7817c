import sys
from pathlib import Path

import pytest
from hypothesis import settings

from pwlnas.arch import nb101_space, nb201_space
from pwlnas.bench import SynthSpec, synth_generate

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("pwlnas", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("pwlnas")

DATA = Path(__file__).parent / "data"

# acceptance test lines, keyed by criterion number, echoed in the summary
RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])


@pytest.fixture(scope="session")
def nb201():
    return nb201_space()


@pytest.fixture(scope="session")
def nb101():
    return nb101_space()


@pytest.fixture(scope="session")
def synth1000():
    return synth_generate(SynthSpec(nb201_space(), 1000, 7, 0.3))


@pytest.fixture(scope="session")
def synth_dense():
    return synth_generate(SynthSpec(nb201_space(), 15625, 3, 0.3))


@pytest.fixture(scope="session")
def synth_small():
    return synth_generate(SynthSpec(nb101_space(), 200, 1, 0.3))
