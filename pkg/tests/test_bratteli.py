import numpy as np
import pytest

from conncalc.bratteli import (
    TracialBratteli,
    af_tower,
    materialize_level,
    pf_condition_residuals,
    pf_solve,
    trace_compat_residual,
    validate_zero_cell,
)
from conncalc.errors import StructuralError
from conncalc.generate import random_tower
from conncalc.semisimple import WeightedCategory


def test_single_simple_tower():
    b = TracialBratteli.single_simple(3)
    assert validate_zero_cell(b)["ok"]
    for k in range(6):
        assert b.weights(k)[0] == pytest.approx(3.0 ** -k, rel=1e-14)


def test_all_ones_tower():
    b = TracialBratteli.constant([[1, 1], [1, 1]])
    assert b.pf_scalar == pytest.approx(2.0)
    assert np.allclose(b.weights(0), [0.5, 0.5])
    assert validate_zero_cell(b)["ok"]
    levels, _ = af_tower(b, 5)
    for lv in levels:
        assert lv.dims.tolist() == [2 ** lv.level] * 2
        assert lv.trace_of_identity() == pytest.approx(1.0)


def test_unnormalized_weights_flagged():
    cats = [WeightedCategory(["a"], [2.0]), WeightedCategory(["a"], [1.0])]
    b = TracialBratteli(cats, [np.array([[2]])], 0, 1, 2.0)
    r = validate_zero_cell(b)
    assert not r["ok"]
    assert any("sum" in e for e in r["errors"])


@pytest.mark.parametrize("adj, d, mu", [
    ([[2]], 2.0, [1.0]),
    ([[0, 1], [1, 0]], 1.0, [0.5, 0.5]),
])
def test_pf_small(adj, d, mu):
    dd, m = pf_solve(adj)
    assert dd == pytest.approx(d, abs=1e-12)
    assert np.allclose(m, mu, atol=1e-12)


def test_pf_a4_against_dense_solver():
    A = np.diag([1, 1, 1], 1) + np.diag([1, 1, 1], -1)
    d, mu = pf_solve(A)
    assert d == pytest.approx(2 * np.cos(np.pi / 5), abs=1e-10)
    ev, vecs = np.linalg.eigh(A.astype(float))
    ref = np.abs(vecs[:, -1]) / np.abs(vecs[:, -1]).sum()
    assert np.allclose(mu, ref, atol=1e-10)
    sine = np.sin(np.arange(1, 5) * np.pi / 5)
    assert np.allclose(mu, sine / sine.sum(), atol=1e-10)


def test_pf_rejects_reducible():
    with pytest.raises(StructuralError):
        pf_solve([[1, 1], [0, 1]])


def test_periodic_levels():
    b = TracialBratteli.from_periodic([[[1, 2], [1, 0]], [[1, 1], [2, 0]]], prefix_functors=[[[1], [1]]])
    L, K = b.preperiod, b.period
    assert (L, K) == (1, 2)
    assert materialize_level(b, 1)[0] is b.levels[1]
    for k in range(L + 1, L + 5):
        assert np.array_equal(b.adjacency(k), b.adjacency(k + K))
        assert b.level(k).labels == b.level(k + K).labels
        assert np.allclose(b.weights(k) / b.weights(k + K), b.pf_scalar)
    assert validate_zero_cell(b, extra_periods=3)["ok"]
    assert max(pf_condition_residuals(b).values()) < 1e-12


def test_trace_compatibility_random_towers():
    rng = np.random.default_rng(0)
    for _ in range(10):
        b = random_tower(rng, 3)
        assert validate_zero_cell(b)["ok"]
        assert trace_compat_residual(b, 8, rng) < 1e-10
