import numpy as np
import pytest

from pcmatch import ContingencyTable, Dataset, Unit


def table(xy, xy_not, x_not_y, x_not_y_not, regime="experimental"):
    return ContingencyTable(xy, xy_not, x_not_y, x_not_y_not, regime=regime)


@pytest.fixture
def table1():
    # deaths / survivals, drug users (x) and non-users (x')
    exp = table(16, 984, 14, 986, "experimental")
    obs = table(2, 998, 28, 972, "observational")
    return exp, obs


@pytest.fixture
def table2():
    exp = table(30, 70, 12, 88, "experimental")
    obs = table(18, 82, 24, 76, "observational")
    return exp, obs


def units_1d(spec):
    """Build a Dataset from ``[(id, Id, x, y), ...]``."""
    return Dataset(
        ids=np.array([s[0] for s in spec], dtype=str),
        covariates=np.array([[s[1]] for s in spec], dtype=float).reshape(len(spec), 1),
        x=np.array([s[2] for s in spec]),
        y=np.array([s[3] for s in spec]),
        covariate_names=("Id",),
    )


@pytest.fixture
def small_partition_units():
    # A {1.0, 2.0}, B {10.0}, C {5.0}, D {1.1, 9.0}
    return units_1d([
        ("a1", 1.0, 0, 0),
        ("a2", 2.0, 0, 0),
        ("b1", 10.0, 0, 1),
        ("c1", 5.0, 1, 0),
        ("d1", 1.1, 1, 1),
        ("d2", 9.0, 1, 1),
    ])


def unit(uid, cov, x=0, y=0):
    return Unit(uid, tuple(np.atleast_1d(cov)), x, y)


# acceptance lines collected by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
