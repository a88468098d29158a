import numpy as np
import pytest

from conncalc.errors import StructuralError
from conncalc.semisimple import (
    GraphFunctor,
    NatTrans,
    WeightedCategory,
    adjoint_functor,
    associator,
    cap,
    categorical_trace,
    compose_functors,
    cup,
    cup_pair,
    identity_functor,
    nt_identity,
    nt_inner,
    nt_star,
    nt_tensor,
    nt_trace,
    nt_trace_compat_check,
    nt_vertical,
    tracial_solution,
    whisker_left,
    whisker_right,
)

from conftest import random_vec


def cat(n, weights=None, prefix="v"):
    if weights is None:
        return WeightedCategory.uniform(n, prefix)
    return WeightedCategory([f"{prefix}{i}" for i in range(n)], weights)


def functor(src, tgt, adj):
    return GraphFunctor(src, tgt, np.asarray(adj))


def random_nt(F, G, rng):
    blocks = {(v, w): random_vec(rng, G.n(v, w) * F.n(v, w)).reshape(G.n(v, w), F.n(v, w))
              for v in range(F.source.size) for w in range(F.target.size)}
    return NatTrans(F, G, blocks)


def random_unitary_nt(F, rng):
    blocks = {}
    for v in range(F.source.size):
        for w in range(F.target.size):
            n = F.n(v, w)
            q, _ = np.linalg.qr(random_vec(rng, n * n).reshape(n, n)) if n else (np.zeros((0, 0)), None)
            blocks[(v, w)] = q
    return NatTrans(F, F, blocks)


class TestCategories:
    def test_rejects_bad_weights_and_labels(self):
        with pytest.raises(StructuralError):
            WeightedCategory(["a", "b"], [1.0, 0.0])
        with pytest.raises(StructuralError):
            WeightedCategory(["a", "a"], [1.0, 1.0])
        with pytest.raises(StructuralError):
            WeightedCategory(["a"], [1.0, 2.0])

    def test_functor_shape_and_bifaithfulness(self):
        with pytest.raises(StructuralError):
            functor(cat(2), cat(3), [[1, 1], [1, 1]])
        F = functor(cat(2), cat(2), [[1, 0], [0, 0]])
        assert not F.is_bifaithful()


class TestComposition:
    def test_all_ones_squared(self):
        A = cat(2)
        FF, basis = compose_functors(functor(A, A, [[1, 1], [1, 1]]), functor(A, A, [[1, 1], [1, 1]]))
        assert FF.adjacency.tolist() == [[2, 2], [2, 2]]
        assert basis.size(0, 1) == 2

    def test_split_then_merge(self):
        FF, _ = compose_functors(functor(cat(1), cat(2), [[1], [1]]), functor(cat(2), cat(1), [[1, 1]]))
        assert FF.adjacency.tolist() == [[2]]

    def test_a3_with_transpose(self):
        A3 = np.array([[1, 0], [1, 1], [0, 1]])  # 2 -> 3
        F = functor(cat(2), cat(3), A3)
        FF, _ = compose_functors(F, adjoint_functor(F))
        assert np.array_equal(FF.adjacency, A3.T @ A3)
        assert FF.adjacency.tolist() == [[2, 1], [1, 2]]

    def test_path_enumeration_is_collision_free(self, rng):
        F = functor(cat(2), cat(3), rng.integers(1, 3, size=(3, 2)))
        G = functor(cat(3), cat(2), rng.integers(1, 3, size=(2, 3)))
        GF, basis = compose_functors(F, G)
        for v in range(2):
            for w in range(2):
                seen = {basis.index(v, w, *basis.decode(v, w, i)) for i in range(GF.n(v, w))}
                assert seen == set(range(GF.n(v, w)))
                assert len({GF.expand(v, w, i) for i in range(GF.n(v, w))}) == GF.n(v, w)

    def test_adjoint_functor(self):
        F = functor(cat(2), cat(2), [[1, 2], [0, 3]])
        assert adjoint_functor(F).adjacency.tolist() == [[1, 0], [2, 3]]
        assert np.array_equal(adjoint_functor(adjoint_functor(F)).adjacency, F.adjacency)


class TestNaturalTransformations:
    def test_flatten_roundtrip(self, rng):
        F = functor(cat(2), cat(3), [[1, 2], [1, 0], [2, 1]])
        G = functor(cat(2), cat(3), [[2, 1], [1, 1], [1, 1]])
        eta = random_nt(F, G, rng)
        back = NatTrans.unflatten(F, G, eta.flatten())
        assert (back - eta).max_abs() == 0.0
        with pytest.raises(StructuralError):
            NatTrans.unflatten(F, G, np.zeros(3))

    def test_star_and_vertical(self, rng):
        F = functor(cat(2), cat(2), [[1, 2], [2, 1]])
        a, b = random_nt(F, F, rng), random_nt(F, F, rng)
        lhs = nt_star(nt_vertical(a, b))
        rhs = nt_vertical(nt_star(b), nt_star(a))
        assert (lhs - rhs).max_abs() < 1e-13
        u = random_unitary_nt(F, rng)
        assert (nt_vertical(u, nt_star(u)) - nt_identity(F)).max_abs() < 1e-13

    def test_whiskering(self, rng):
        A, B = cat(2), cat(3)
        G = functor(A, B, [[1, 1], [1, 0], [0, 2]])
        H = functor(A, B, [[1, 1], [1, 0], [0, 2]])
        F = functor(B, A, [[1, 1, 0], [0, 1, 1]])
        eta = random_nt(G, H, rng)
        assert (whisker_left(identity_functor(B), eta) - eta).max_abs() == 0.0
        idG = nt_identity(G)
        assert (whisker_left(F, idG) - nt_identity(whisker_left(F, idG).domain)).max_abs() == 0.0
        # whiskering is a functor for vertical composition
        kap = random_nt(H, G, rng)
        lhs = whisker_left(F, nt_vertical(kap, eta))
        rhs = nt_vertical(whisker_left(F, kap), whisker_left(F, eta))
        assert (lhs - rhs).max_abs() < 1e-12
        lhs = whisker_right(nt_vertical(kap, eta), F)
        rhs = nt_vertical(whisker_right(kap, F), whisker_right(eta, F))
        assert (lhs - rhs).max_abs() < 1e-12

    def test_interchange(self, rng):
        A, B, C = cat(2), cat(2), cat(3)
        F = functor(A, B, [[1, 1], [2, 0]])
        G = functor(B, C, [[1, 0], [1, 1], [0, 2]])
        beta, delta = random_nt(F, F, rng), random_nt(F, F, rng)
        alpha, gamma = random_nt(G, G, rng), random_nt(G, G, rng)
        lhs = nt_vertical(nt_tensor(alpha, beta), nt_tensor(gamma, delta))
        rhs = nt_tensor(nt_vertical(alpha, gamma), nt_vertical(beta, delta))
        assert (lhs - rhs).max_abs() < 1e-11

    def test_associator_is_unitary(self):
        A = cat(2)
        F = functor(A, A, [[1, 1], [1, 0]])
        FF, _ = compose_functors(F, F)
        left, _ = compose_functors(FF, F)
        right, _ = compose_functors(F, FF)
        a = associator(left, right)
        assert (nt_vertical(nt_star(a), a) - nt_identity(left)).max_abs() == 0.0


class TestTraces:
    def test_categorical_trace(self, rng):
        A = cat(3, [0.5, 0.3, 0.2])
        assert categorical_trace([1, 1, 1], [np.eye(1)] * 3, A) == pytest.approx(1.0)
        e = [np.zeros((1, 1)), np.array([[1.0, 0], [0, 0]]), np.zeros((1, 1))]
        assert categorical_trace([1, 2, 1], e, A) == pytest.approx(0.3)
        x = [2, 1, 3]
        a = [random_vec(rng, n * n).reshape(n, n) for n in x]
        b = [random_vec(rng, n * n).reshape(n, n) for n in x]
        ab = categorical_trace(x, [p @ q for p, q in zip(a, b)], A)
        ba = categorical_trace(x, [q @ p for p, q in zip(a, b)], A)
        assert abs(ab - ba) < 1e-12

    def test_nt_trace_and_inner(self, rng):
        mu, nu = np.array([0.6, 0.4]), np.array([0.2, 0.3, 0.5])
        adj = np.array([[1, 2], [1, 0], [2, 1]])
        F = functor(cat(2, mu), cat(3, nu), adj)
        expect = sum(mu[u] * nu[w] * adj[w, u] for u in range(2) for w in range(3))
        assert nt_trace(nt_identity(F)) == pytest.approx(expect)
        blocks = {k: np.zeros_like(b) for k, b in nt_identity(F).blocks.items()}
        blocks[(1, 0)] = np.diag([0.0, 1.0])  # sigma sigma* for one path 1 -> 0
        assert nt_trace(NatTrans(F, F, blocks)) == pytest.approx(mu[1] * nu[0])
        eta = random_nt(F, F, rng)
        assert nt_trace(nt_vertical(nt_star(eta), eta)).real > 0
        kap = random_nt(F, F, rng)
        w = np.concatenate([np.full(b.size, mu[v] * nu[u]) for (v, u), b in sorted(eta.blocks.items())])
        assert abs(nt_inner(eta, kap) - np.vdot(kap.flatten(), w * eta.flatten())) < 1e-13

    def test_duality(self):
        A, B = cat(2, [0.5, 0.5]), cat(2, [0.25, 0.25])
        F = functor(A, B, [[1, 1], [1, 1]])
        d = tracial_solution(F)
        assert np.allclose(d.kappa * tracial_solution(adjoint_functor(F)).kappa.T, 1.0)
        # closed clockwise loop equals 1 exactly when the weights are tracial
        loop = nt_vertical(cap(F), cup(F))
        assert all(np.allclose(b, 1.0) for b in loop.blocks.values())
        single = functor(cat(1, [1.0]), cat(1, [1.0]), [[1]])
        assert np.allclose(cup(single).blocks[(0, 0)], [[1.0]])
        assert np.allclose(nt_vertical(nt_star(cup_pair(single)), cup_pair(single)).blocks[(0, 0)], 1.0)

    def test_zigzag(self):
        A, B = cat(2, [0.5, 0.5]), cat(2, [0.25, 0.25])
        F = functor(A, B, [[1, 1], [1, 1]])
        Fp = adjoint_functor(F)
        # F -> F F' F -> F with the unit cup_pair and the counit cap
        up = nt_vertical(associator(whisker_right(cup_pair(F), F).codomain,
                                    whisker_left(F, cup(F)).codomain),
                         whisker_right(cup_pair(F), F))
        down = whisker_left(F, cap(F))
        comp = nt_vertical(down, up)
        ref = nt_identity(F)
        a_in = associator(F, comp.domain)
        a_out = associator(comp.codomain, F)
        z = nt_vertical(a_out, nt_vertical(comp, a_in))
        scale = z.blocks[(0, 0)][0, 0]
        assert (z * (1 / scale) - ref).max_abs() < 1e-12
        assert Fp.adjacency.shape == (2, 2)

    def test_trace_compatibility(self, rng):
        A, B, C = cat(2, [0.3, 0.7]), cat(2, [0.4, 0.6]), cat(2, [0.5, 0.5])
        F = functor(A, B, [[1, 1], [1, 2]])
        G = functor(B, C, [[2, 1], [1, 1]])
        GF, _ = compose_functors(F, G)
        assert nt_trace_compat_check(F, G, nt_identity(GF)) < 1e-12
        assert nt_trace_compat_check(F, G, random_nt(GF, GF, rng)) < 1e-11
