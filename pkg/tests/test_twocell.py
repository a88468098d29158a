import numpy as np
import pytest

from conncalc import _kernels
from conncalc.bratteli import TracialBratteli
from conncalc.connection import build_graph_identity, build_vertex_model, gauge_transform, haar_unitary
from conncalc.errors import StructuralError
from conncalc.generate import random_parallel_pair
from conncalc.semisimple import nt_identity
from conncalc.twocell import (
    NtSpace,
    TwoCellSeq,
    _kernel_matrix,
    exchange_check,
    exchange_residual_vec,
    exchange_via_loop,
    loop_adjoint_apply,
    loop_apply,
    loop_matrix,
    loop_scalar,
    spectral_radius,
    ucp_suite,
    vertex_closed_form,
    vertex_closed_form_adjoint,
)

from conftest import random_endo, random_vec


def test_space_dimensions(rng):
    c = build_vertex_model(haar_unitary(6, rng), 2, 3)
    assert NtSpace(c, c, 1).dim == 9
    g = build_graph_identity(TracialBratteli.constant([[1, 1], [1, 1]]))
    assert NtSpace(g, g, 1).dim == int((g.lam_adj(1) ** 2).sum())


def test_zero_size_blocks_contribute_nothing():
    t = TracialBratteli.constant([[1, 1], [1, 1]])
    a = build_graph_identity(t)
    sp = NtSpace(a, a, 0)
    assert sp.dim == sum(r * c for r, c in sp.shapes.values())


def test_matrix_matches_diagrammatic_loop(rng):
    for _ in range(5):
        c1, c2 = random_parallel_pair(rng, max_simples=3)
        for k in (1, 2):
            op = loop_matrix(c1, c2, k)
            dom, cod = op.domain_space, op.codomain_space
            x = random_vec(rng, dom.dim)
            y = random_vec(rng, cod.dim)
            direct = cod.from_nat(loop_apply(c1, c2, k, dom.to_nat(x)))
            assert np.max(np.abs(op.apply(x) - direct), initial=0) < 1e-12
            back = dom.from_nat(loop_adjoint_apply(c1, c2, k, cod.to_nat(y)))
            assert np.max(np.abs(op.apply_adjoint(y) - back), initial=0) < 1e-12
            assert abs(cod.inner(op.apply(x), y) - dom.inner(x, op.apply_adjoint(y))) < 1e-10


def test_backends_agree(rng):
    c1, c2 = random_parallel_pair(rng, max_simples=3)
    a = _kernel_matrix(c1, c2, 1, kernel=_kernels.fallback_loop_matrix_kernel)
    b = _kernel_matrix(c1, c2, 1)
    assert np.max(np.abs(a - b), initial=0) < 1e-14


def test_unital(rng):
    c = random_endo(rng)
    op = loop_matrix(c, c, 1)
    assert np.max(np.abs(op.apply(op.domain_space.identity_vector()) - op.codomain_space.identity_vector())) < 1e-12


def test_vertex_identity_is_identity():
    c = build_vertex_model(np.eye(4), 2, 2)
    assert np.max(np.abs(loop_matrix(c, c, 1).matrix - np.eye(4))) < 1e-15


def test_vertex_closed_forms(rng):
    for nx, ny in [(2, 2), (3, 2), (2, 3)]:
        U = haar_unitary(nx * ny, rng)
        c = build_vertex_model(U, nx, ny)
        op = loop_matrix(c, c, 1)
        assert np.max(np.abs(op.matrix - vertex_closed_form(U, nx, ny).reshape(ny * ny, -1))) < 1e-12
        # the trace adjoint carries the closed loop |X|^2 against the companion formula
        adj = vertex_closed_form_adjoint(U, nx, ny).reshape(ny * ny, -1)
        assert np.max(np.abs(op.adjoint_matrix - nx * nx * adj)) < 1e-12


def test_single_x_is_conjugation(rng):
    V = haar_unitary(3, rng)
    c = build_vertex_model(V, 1, 3)
    eta = random_vec(rng, 9).reshape(3, 3)
    out = loop_matrix(c, c, 1).apply(eta.ravel()).reshape(3, 3)
    assert np.max(np.abs(out - V.conj().T @ eta @ V)) < 1e-12


def test_exchange_relation(rng):
    c = random_endo(rng)
    ident = nt_identity(c.lam(0))
    assert exchange_check(c, c, 0, ident, nt_identity(c.lam(1))) < 1e-12
    sp0, sp1 = NtSpace(c, c, 0), NtSpace(c, c, 1)
    assert exchange_residual_vec(c, c, 0, random_vec(rng, sp0.dim), random_vec(rng, sp1.dim)) > 1e-3


def test_loop_scalar_and_exchange_via_loop(rng):
    c = build_vertex_model(haar_unitary(6, rng), 3, 2)
    assert np.allclose(loop_scalar(c, 1), 9.0)
    d, us = gauge_transform(c, rng)
    ok, res, direct = exchange_via_loop(c, d, 1, us[1], cross_check=True)
    assert ok and direct < 1e-12
    ok, res = exchange_via_loop(c, d, 1, random_vec(rng, 4))
    assert not ok and res > 1e-3
    ok, res = exchange_via_loop(c, d, 1, np.zeros(4))
    assert ok and res == 0.0


def test_ucp_suite(rng):
    for c in (random_endo(rng), build_vertex_model(haar_unitary(4, rng), 2, 2)):
        r = ucp_suite(c, 1, rng=rng)
        assert r["ok"], r
        assert r["trace_contraction_min_eig"] >= -1e-9
        assert r["cstar_norm_ratio"] <= 1 + 1e-9


def test_ucp_detects_corruption(rng):
    c = build_vertex_model(haar_unitary(4, rng), 2, 2)
    W = c.w(1)[(0, 0)].copy()
    W[0, :] *= 1.5
    r = ucp_suite(c.with_blocks([{(0, 0): W}]), 1, rng=rng)
    assert not r["ok"]
    assert r["unital_residual"] > 1e-3 or r["schwarz_min_eig"] < -1e-9


def test_spectral_radius():
    assert spectral_radius(np.diag([0.5, -1.0])) == pytest.approx(1.0)
    with pytest.raises(StructuralError):
        spectral_radius(np.zeros((2, 3)))


def test_two_cell_seq_levels(rng):
    c = random_endo(rng)
    sp = NtSpace(c, c, c.preperiod)
    seq = TwoCellSeq(c, c, [(1.0, sp.identity_vector())])
    for k in range(4):
        assert np.max(np.abs(seq.vec_at(k) - NtSpace(c, c, k).identity_vector())) < 1e-12
    assert seq.quasi_flat_defect(4) < 1e-12
    doubled = seq + seq.scaled(1.0)
    assert np.allclose(doubled.vec_at(2), 2 * seq.vec_at(2))
