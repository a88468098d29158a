import numpy as np
import pytest

from conncalc.connection import build_random_connection, build_vertex_model, gauge_transform, haar_unitary
from conncalc.generate import identity_lambdas, random_tower


def random_endo(rng, max_simples=3, name="endo"):
    """Random 1-cell from a random PF tower to itself with identity ``Lambda``."""
    t = random_tower(rng, max_simples)
    return build_random_connection(t, t, lambdas=identity_lambdas(t), rng=rng, name=name)


def random_vec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def vertex_cell(rng):
    return build_vertex_model(haar_unitary(6, rng), 2, 3)


@pytest.fixture
def endo_pair(rng):
    c = random_endo(rng)
    d, _ = gauge_transform(c, rng, name="gauge")
    return c, d
