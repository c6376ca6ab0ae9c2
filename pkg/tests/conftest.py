import numpy as np
import pytest

from wignermc.model import (FieldConfig, GaussianPacket, PhaseSpacePoint,
                            PhysicalConstants)
from wignermc.stencil import Discretization, build_stencil


@pytest.fixture(scope="session")
def consts():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def fields():
    # generic linear fields: nonzero gradient, tilt and both electric terms
    return FieldConfig(b0=0.4, b1=1.0, ex=0.3, ey=-0.2)


@pytest.fixture(scope="session")
def disc():
    return Discretization(delta_p=0.5, delta_x=0.5)


@pytest.fixture(scope="session")
def stencil(disc, fields, consts):
    return build_stencil(disc, fields, consts)


@pytest.fixture(scope="session")
def gauss_f0():
    return GaussianPacket(center=PhaseSpacePoint(0.7, -0.3, 0.2, 0.1),
                          sigma_p=0.35, sigma_x=0.45)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collect one summary line per acceptance criterion.

    Lines are printed immediately (visible under -s) and echoed as a block
    in the terminal summary, so a plain ``pytest -v`` run still shows them.
    """
    lines = request.config._acceptance_lines

    def report(line: str) -> None:
        lines.append(line)
        print(line, flush=True)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)
