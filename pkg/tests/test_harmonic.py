import numpy as np
import pytest

from conncalc.bimodule import finite_level_two_cell
from conncalc.bratteli import TracialBratteli
from conncalc.connection import (
    build_graph_identity,
    build_random_connection,
    build_vertex_model,
    gauge_transform,
    haar_unitary,
    tensor_one_cells,
)
from conncalc.errors import ConvergenceError, HypothesisError, SpectralError
from conncalc.generate import identity_lambdas
from conncalc.harmonic import (
    bounded_harmonic_basis,
    horizontal_compose,
    identity_two_cell,
    is_flat,
    izumi_fixed_points,
    periodic_two_cells,
    vertical_compose,
)
from conncalc.twocell import NtSpace, TwoCellSeq, exchange_check, loop_matrix

from conftest import random_endo, random_vec

GOLDEN = [[1, 1], [1, 0]]


def golden_tower():
    return TracialBratteli.constant(GOLDEN, name="golden")


class TestHarmonicBasis:
    def test_swap_matrix(self):
        b = bounded_harmonic_basis(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(b.phases, [1.0, -1.0])
        assert np.allclose(b.vectors[0], np.array([1, 1]) / np.sqrt(2))
        assert np.allclose(np.abs(b.vectors[1]), np.array([1, 1]) / np.sqrt(2))
        assert np.allclose(b.peripheral_projector(), np.eye(2))

    def test_rotation_phase(self):
        th = 0.7
        X = np.diag([np.exp(1j * th), 0.3])
        b = bounded_harmonic_basis(X)
        assert b.dimension == 1 and abs(b.phases[0] - np.exp(1j * th)) < 1e-12
        parts, rest = b.decompose(np.array([2.0, 5.0]))
        assert np.allclose(parts[0][1], [2.0, 0.0]) and rest == pytest.approx(5.0)

    def test_rejects_expanding_and_defective(self):
        with pytest.raises(SpectralError):
            bounded_harmonic_basis(np.array([[1.5]]))
        with pytest.raises(SpectralError, match="defective"):
            bounded_harmonic_basis(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_gram_orthonormal_within_cluster(self):
        g = np.array([1.0, 2.0, 3.0])
        b = bounded_harmonic_basis(np.eye(3), gram=g)
        V = np.column_stack(b.vectors)
        assert np.allclose((V.conj().T * g) @ V, np.eye(3))


class TestPeriodicTwoCells:
    def test_vertex_identity_full_matrix_algebra(self):
        c = build_vertex_model(np.eye(9), 3, 3)
        cells = periodic_two_cells(c, c)
        assert len(cells) == 9
        assert all(is_flat(s).flat for s in cells)
        assert izumi_fixed_points(c).dimension == 9

    def test_golden_graph_scalar_flat_part(self):
        g = build_graph_identity(golden_tower())
        cells = periodic_two_cells(g, g)
        assert len(cells) == 1
        v = cells[0].vec_at(0)
        ident = NtSpace(g, g, 0).identity_vector()
        assert np.max(np.abs(v / v[0] - ident)) < 1e-12

    def test_bipartite_graph_has_minus_one_cell(self):
        g = build_graph_identity(TracialBratteli.constant([[0, 2], [2, 0]]))
        cells = periodic_two_cells(g, g)
        assert sorted(np.round([s.terms[0][0].real for s in cells], 12)) == [-1.0, 1.0]
        minus = next(s for s in cells if s.terms[0][0].real < 0)
        # phase -1: eta^{(k+1)} = -eta^{(k)} and the exchange relation holds level by level
        assert np.allclose(minus.vec_at(1), -minus.vec_at(0))
        for k in range(4):
            assert exchange_check(g, g, k, minus.at(k), minus.at(k + 1)) < 1e-12

    def test_generic_endo_contains_identity(self, rng):
        c = random_endo(rng)
        fixed = izumi_fixed_points(c)
        ident = NtSpace(c, c, c.preperiod).identity_vector()
        P = fixed.projector(1.0)
        assert np.max(np.abs(P @ ident - ident)) < 1e-10

    def test_sequences_are_quasi_flat(self, rng):
        c = random_endo(rng)
        d = gauge_transform(c, rng)[0]
        for s in periodic_two_cells(c, d):
            assert s.quasi_flat_residual < 1e-10
            for k in range(6):
                S = loop_matrix(c, d, k + 1)
                assert np.max(np.abs(S.apply(s.vec_at(k + 1)) - s.vec_at(k))) < 1e-10

    def test_refuses_without_pf(self):
        t = golden_tower()
        lv = t.levels
        mu1 = np.array([0.3, 0.2]) / 0.8
        mu0 = np.array(GOLDEN).T @ mu1
        bad = t.reweighted([lv[0].with_weights(mu0), lv[1].with_weights(mu1)])
        g = build_graph_identity(bad)
        with pytest.raises(HypothesisError) as info:
            periodic_two_cells(g, g)
        assert any("PF condition" in f for f in info.value.failed)
        cells = periodic_two_cells(g, g, require_pf=False)
        assert cells.hypotheses_failed


class TestFlatness:
    def test_identity_flat_from_zero(self, rng):
        rep = is_flat(identity_two_cell(random_endo(rng)))
        assert rep.flat and rep.flat_from == 0 and rep.worst_residual < 1e-12

    def test_random_sequence_not_flat(self, rng):
        c = random_endo(rng)
        sp = NtSpace(c, c, c.preperiod)
        rep = is_flat(TwoCellSeq(c, c, [(1.0, random_vec(rng, sp.dim))]))
        assert rep.worst_residual > 1e-6


class TestComposition:
    def test_identity_is_neutral(self, rng):
        c = random_endo(rng)
        d = gauge_transform(c, rng)[0]
        x = periodic_two_cells(c, d)[0]
        for y in (vertical_compose(x, identity_two_cell(c)), vertical_compose(identity_two_cell(d), x)):
            for k in range(4):
                assert np.max(np.abs(y.vec_at(k) - x.vec_at(k))) < 1e-10

    def test_vertex_identity_pointwise_product(self, rng):
        c = build_vertex_model(np.eye(4), 2, 2)
        a, b = random_vec(rng, 4), random_vec(rng, 4)
        x, y = TwoCellSeq(c, c, [(1.0, a)]), TwoCellSeq(c, c, [(1.0, b)])
        z = vertical_compose(x, y)
        assert np.allclose(z.vec_at(0), (a.reshape(2, 2) @ b.reshape(2, 2)).ravel())
        h = horizontal_compose(x, y)
        ref = np.kron(a.reshape(2, 2), b.reshape(2, 2))
        got = h.vec_at(0).reshape(4, 4)
        # same Kronecker action up to the ordering of the fused path basis
        assert np.allclose(np.sort(np.abs(got).ravel()), np.sort(np.abs(ref).ravel()))
        assert np.allclose(np.linalg.svd(got, compute_uv=False), np.linalg.svd(ref, compute_uv=False))

    def test_horizontal_identities(self, rng):
        c = random_endo(rng)
        d = build_random_connection(c.source, c.source, lambdas=identity_lambdas(c.source), rng=rng)
        F = tensor_one_cells(d, c)
        h = horizontal_compose(identity_two_cell(d), identity_two_cell(c), F, F)
        for k in range(3):
            assert np.max(np.abs(h.vec_at(k) - NtSpace(F, F, k).identity_vector())) < 1e-10

    def test_matches_operator_composition(self, rng):
        t = golden_tower()
        a = build_random_connection(t, t, lambdas=identity_lambdas(t), rng=rng)
        b, c = gauge_transform(a, rng)[0], gauge_transform(a, rng)[0]
        x, z = periodic_two_cells(a, b)[0], periodic_two_cells(b, c)[0]
        comp = vertical_compose(z, x)
        for k in range(5):
            ox = finite_level_two_cell(a, b, k, x.at(k))["operator"]
            oz = finite_level_two_cell(b, c, k, z.at(k))["operator"]
            oc = finite_level_two_cell(a, c, k, comp.at(k))["operator"]
            assert np.max(np.abs(oz @ ox - oc)) < 1e-10

    def test_limit_of_non_harmonic_input(self, rng):
        g = build_graph_identity(golden_tower())
        sp = NtSpace(g, g, 0)
        y = TwoCellSeq(g, g, [(1.0, rng.standard_normal(sp.dim))])
        z = vertical_compose(identity_two_cell(g), y)
        assert z.limit_report["method"] == "iteration"
        assert z.limit_report["iterations"] > 1
        assert z.limit_report["shortcut_gap"] < 1e-9
        assert is_flat(z).flat

    def test_oscillating_limit_exhausts_budget(self, rng):
        g = build_graph_identity(TracialBratteli.constant([[0, 2], [2, 0]]))
        sp = NtSpace(g, g, 0)
        y = TwoCellSeq(g, g, [(1.0, rng.standard_normal(sp.dim))])
        with pytest.raises(ConvergenceError):
            vertical_compose(identity_two_cell(g), y, max_iter=200)
