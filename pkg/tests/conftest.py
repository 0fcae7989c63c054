from fractions import Fraction as F

import pytest

from doflab import create_app
from doflab.bounds import private_region
from doflab.config import Settings
from doflab.core import UserSubset
from doflab.schemedsl import builtin, builtin_names, parse_scheme

D1, D2, D3 = UserSubset.of(1), UserSubset.of(2), UserSubset.of(3)
D12, D13, D23, D123 = UserSubset.of(1, 2), UserSubset.of(1, 3), UserSubset.of(2, 3), UserSubset.of(1, 2, 3)

# a small, valid header reused by scheme tests; add slots and streams below it
HEADER = """scheme "t"
users 3
antennas 3
slots 2
csit 1-2: P D D
data a -> R1
data b, c, e -> R2
"""


@pytest.fixture(scope="session")
def schemes():
    return {name: parse_scheme(builtin(name)) for name in builtin_names()}


@pytest.fixture(scope="session")
def private31():
    return private_region(3, 1)


@pytest.fixture
def app():
    app = create_app(Settings(max_trials=50))
    app.config["TESTING"] = True
    return app


@pytest.fixture
def client(app):
    return app.test_client()


def frac(*values):
    return tuple(F(v) for v in values)
