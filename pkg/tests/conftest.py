import math

import pytest

from abelkit import AbelEquation

LAMBDA_MAX = 2.0 * math.sqrt(3.0) / 9.0
ROOT3_3 = math.sqrt(3.0) / 3.0


def eq318(lam=LAMBDA_MAX, sign=-1.0):
    """y' - y^3 + y + (sign * lam) sin^2 t = 0; sign=+1 gives the mirror."""
    return AbelEquation.from_strings("-1", "0", "1", f"{sign * lam!r}*sin(t)^2", "3.18")


def eq320():
    return AbelEquation.from_strings("-1", "0", "1", "0", "3.20")


def eq321(mu=2.0):
    return AbelEquation.from_strings("-1", "3", "3", f"-3 - {mu!r}*sin(t)", "3.21")


def eq322():
    return AbelEquation.from_strings("1", "3", "3", "1", "3.22")


def eq323():
    return AbelEquation.from_strings("-1", "3", "-3", "1", "3.23")


def thm51_eq(sign=-1.0):
    return AbelEquation.from_strings("1", "0", "1", f"{sign!r}*sin(t)^2", "closed demo")


@pytest.fixture
def example31():
    return eq318()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
