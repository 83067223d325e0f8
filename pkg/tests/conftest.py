import math

import numpy as np
import pytest

from zygfrac.fields import QuadratureGrid, make_field
from zygfrac.params import OperatorParams


def oracle_kernel(a, b, t, x):
    """Direct evaluation with ordinary powers, no log-space tricks."""
    x1, x2, x3 = (abs(float(v)) for v in x)
    br = x1 * x2 / x3 + x3 / (x1 * x2)
    return x1 ** (a - 1) * x2 ** (a - 1) * x3 ** (b - 1) * br ** (-t)


def oracle_floor_log2(d):
    e = math.floor(math.log2(d))
    while 2.0 ** e > d:
        e -= 1
    while 2.0 ** (e + 1) <= d:
        e += 1
    return e


def oracle_shell(x, y):
    e = [oracle_floor_log2(abs(yi - xi)) for xi, yi in zip(x, y)]
    j = e[0]
    ell = j - e[1]
    k = 2 * j - ell - e[2]
    return ell, j, k


@pytest.fixture
def main_params():
    return OperatorParams(0.25, 0.25, 1.0, 12 / 5, 6)


@pytest.fixture
def unit_zbox():
    return make_field("zygmund_box_indicator", (1.0, 1.0))


@pytest.fixture
def grid16(unit_zbox):
    return QuadratureGrid.over_box(unit_zbox.support_box, (16, 16, 16))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
