import sys

import pytest

from redmule_sim.datapath import run
from redmule_sim.semiring import get_kernel
from redmule_sim.tiling import ArrayConfig
from redmule_sim.workloads import gen_operands


@pytest.fixture(scope="session")
def run96():
    """MATMUL 96x96x96 on the default 12x4, P=3 array with ideal memory."""
    x, w, y = gen_operands(0, 96, 96, 96)
    return run(ArrayConfig(), get_kernel("matmul"), x, w, y)


@pytest.fixture(scope="session")
def run48():
    x, w, y = gen_operands(1, 48, 48, 48)
    return (x, w, y), run(ArrayConfig(), get_kernel("matmul"), x, w, y)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
