import numpy as np
import pytest

from conncalc.bimodule import (
    HSpace,
    central_part,
    compression_identity_check,
    finite_level_two_cell,
    include_h,
    module_compat_residual,
    oracle_flat_dimension,
    phi_matrix,
    pp_basis,
    projection_operator,
    theta_candidate,
)
from conncalc.bratteli import TracialBratteli
from conncalc.connection import build_graph_identity, build_vertex_model, gauge_transform, haar_unitary
from conncalc.generate import random_parallel_pair
from conncalc.harmonic import periodic_two_cells
from conncalc.semisimple import nt_component, nt_identity
from conncalc.twocell import NtSpace

from conftest import random_endo, random_vec

PHI = (1 + np.sqrt(5)) / 2


def golden_identity():
    return build_graph_identity(TracialBratteli.constant([[1, 1], [1, 0]]))


def test_inclusion_is_isometric_and_linear(rng):
    c = random_endo(rng)
    for k in range(3):
        h, h1 = HSpace(c, k), HSpace(c, k + 1)
        x, y = h.random(rng), h.random(rng)
        assert abs(h1.norm(include_h(c, k, x)) - h.norm(x)) < 1e-11 * max(1.0, h.norm(x))
        assert np.max(np.abs(include_h(c, k, np.zeros(h.dim))), initial=0) == 0.0
        lin = include_h(c, k, 2 * x + 1j * y) - 2 * include_h(c, k, x) - 1j * include_h(c, k, y)
        assert np.max(np.abs(lin), initial=0) < 1e-12


def test_module_compatibility(rng):
    c = random_endo(rng)
    for k in range(3):
        assert module_compat_residual(c, k, rng) < 1e-11


def test_phi_adjoint_and_identity(rng):
    c1, c2 = random_parallel_pair(rng, max_simples=3)
    k = 1
    sp = NtSpace(c1, c2, k)
    gamma = nt_component(sp.to_nat(random_vec(rng, sp.dim)), HSpace(c1, k).X)
    hl, ho = HSpace(c1, k), HSpace(c2, k)
    P = phi_matrix(c1, c2, k, gamma)
    Pstar = phi_matrix(c2, c1, k, [g.conj().T for g in gamma])
    x, z = hl.random(rng), ho.random(rng)
    assert abs(ho.inner(P @ x, z) - hl.inner(x, Pstar @ z)) < 1e-10
    ident = nt_component(nt_identity(c1.lam(k)), hl.X)
    assert np.allclose(phi_matrix(c1, c1, k, ident), np.eye(hl.dim))


def test_projections(rng):
    c = random_endo(rng)
    h2 = HSpace(c, 2)
    p0, p1 = projection_operator(c, 0, 2), projection_operator(c, 1, 2)
    assert np.max(np.abs(p0 @ p1 - p0)) < 1e-11
    assert np.max(np.abs(p0 @ p0 - p0)) < 1e-11
    G = np.diag(h2.gram)
    assert np.max(np.abs(G @ p0 - p0.conj().T @ G)) < 1e-11
    assert np.allclose(projection_operator(c, 2, 2), np.eye(h2.dim))


def test_compression_identity(rng):
    c = build_vertex_model(np.eye(4), 2, 2)
    sp = NtSpace(c, c, 1)
    assert compression_identity_check(c, c, 1, random_vec(rng, sp.dim)) < 1e-12
    assert compression_identity_check(c, c, 1, np.zeros(sp.dim)) == 0.0
    for _ in range(4):
        c1, c2 = random_parallel_pair(rng, max_simples=3, max_mult=2)
        for k in range(1, 5):
            if max(HSpace(c1, k).dim, HSpace(c2, k).dim) > 400:
                break
            sp = NtSpace(c1, c2, k)
            assert compression_identity_check(c1, c2, k, random_vec(rng, sp.dim)) < 1e-9


def test_pp_basis_values():
    basis, res, d = pp_basis(build_vertex_model(np.eye(4), 2, 2))
    assert len(basis) == 2 and res == 0.0 and d == pytest.approx(2.0)
    basis, res, d = pp_basis(golden_identity())
    assert res < 1e-12 and d == pytest.approx(PHI, abs=1e-12)


def test_round_trip_and_central_projection(rng):
    c = random_endo(rng)
    d = gauge_transform(c, rng)[0]
    k = 2
    sp = NtSpace(c, d, k)
    ident = finite_level_two_cell(c, c, k, nt_identity(c.lam(k)))
    assert ident["residual"] < 1e-12
    r = finite_level_two_cell(c, d, k, sp.to_nat(random_vec(rng, sp.dim)))
    assert r["residual"] < 1e-11 and r["defect"] < 1e-11
    hl, ho = HSpace(c, k), HSpace(d, k)
    T = random_vec(rng, ho.dim * hl.dim).reshape(ho.dim, hl.dim)
    rep = finite_level_two_cell(c, d, k, operator=T)
    assert rep["defect"] > 1e-3
    eta, defect = central_part(c, d, k, rep["gamma"])
    assert defect == pytest.approx(rep["defect"])


def test_oracle_dimension_matches_harmonic():
    g = golden_identity()
    dims, sat = oracle_flat_dimension(g, g, 0, 4)
    assert dims == [2, 1, 1, 1] and sat == 2
    assert len(periodic_two_cells(g, g)) == dims[-1]
    v = build_vertex_model(np.eye(4), 2, 2)
    dims, _ = oracle_flat_dimension(v, v, 0, 3)
    assert dims[-1] == 4


def test_oracle_dimension_generic(rng):
    c = random_endo(rng)
    dims, _ = oracle_flat_dimension(c, c, c.preperiod, 3)
    assert dims[-1] == len(periodic_two_cells(c, c))


def test_theta_candidate_positive():
    theta, op = theta_candidate(golden_identity(), 1)
    assert np.all(theta > 0)
    assert np.allclose(theta, 1 / PHI)
    assert op.shape[0] == op.shape[1]
