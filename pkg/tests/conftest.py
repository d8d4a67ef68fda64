import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from z2perc.gauge import GaugeConfig
from z2perc.lattice import build_lattice


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical runs (minutes)")
    config.addinivalue_line("markers", "heavy: hour-scale acceptance runs, opt in with Z2_HEAVY=1")
    config.addinivalue_line("markers", "overnight: the quantum critical point run, opt in with Z2_OVERNIGHT=1")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


def straight_loop(topo, dim=0, offset=0):
    """Strings on the L links of one straight line winding along ``dim``."""
    strings = np.zeros(topo.link_count, dtype=np.uint8)
    for step in range(topo.linear_size):
        x = [0] * topo.dimension
        x[dim] = step
        x[(dim + 1) % topo.dimension] = offset
        strings[topo.link_index(topo.site_index(*x), dim)] = 1
    return GaugeConfig(topo, strings)


def plaquette_loop(topo, plaq=0):
    strings = np.zeros(topo.link_count, dtype=np.uint8)
    strings[topo.plaquettes[plaq]] = 1
    return GaugeConfig(topo, strings)


@pytest.fixture
def square4():
    return build_lattice(2, 4)


@pytest.fixture
def cubic4():
    return build_lattice(3, 4)
