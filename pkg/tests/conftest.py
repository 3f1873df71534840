import numpy as np
import pytest

from smclmi import cuk
from smclmi.model import SlidingSurface

P = cuk.DEFAULT
SQ5 = np.sqrt(5.0)
X_A = np.array([0.5, 1.0, 15.0, -5.0])
X_B = np.array([3 - SQ5, SQ5 - 1, 5 * (SQ5 + 1), 5 * (1 - SQ5)])


def cuk_rhs(x, u, p=P):
    """Converter state equations written out by hand."""
    i1, i2, v1, v2 = x
    return np.array([
        (p.v_in - (1 - u) * v1) / p.l1,
        (u * v1 + v2) / p.l2,
        ((1 - u) * i1 - u * i2) / p.c1,
        (-i2 - v2 / p.r_load) / p.c2,
    ])


def dicm_rhs(x, p=P):
    i1, i2, v1, v2 = x
    di = (p.v_in - v1 - v2) / (p.l1 + p.l2)
    return np.array([di, -di, -i2 / p.c1, (-i2 - v2 / p.r_load) / p.c2])


def dcvm_rhs(x, p=P):
    i1, i2, v1, v2 = x
    return np.array([p.v_in / p.l1, v2 / p.l2, 0.0, (-i2 - v2 / p.r_load) / p.c2])


@pytest.fixture
def surf_a():
    return cuk.surface_a(0.5, 0.01)


@pytest.fixture
def surf_b():
    return cuk.surface_b(1.0, 1.0, 2.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_states(rng, x_star, count, spread=(0.3, 0.3, 3.0, 1.0)):
    return x_star + rng.uniform(-1, 1, (count, 4)) * np.array(spread)


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    if rep.failed and call.excinfo is not None:
        details.append(call.excinfo.exconly().splitlines()[0][:200])
    ACCEPTANCE[item.nodeid] = (mark.args[0], mark.args[1], "PASS" if rep.passed else "FAIL", details)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, verdict, details in sorted(ACCEPTANCE.values(), key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {title}")
        for d in details:
            terminalreporter.write_line(f"    {d}")


__all__ = ["P", "SQ5", "X_A", "X_B", "cuk_rhs", "dicm_rhs", "dcvm_rhs", "random_states", "SlidingSurface"]
