"""Weighted semisimple categories, graph functors and natural transformations.

A finite semisimple category is recorded by its list of simple objects and a
positive weight per simple.  A bi-faithful functor between two such categories
is a bipartite multigraph, stored as an adjacency matrix of shape
``|target| x |source|`` whose entry ``(w, v)`` is ``dim hom(w, F v)``.  The
standard basis of each hom space is indexed by edges ``0 .. N-1``.

A natural transformation ``eta: F -> G`` between parallel functors is a family
of blocks, one per pair ``(v, w)`` of source and target simples, of shape
``G(w, v) x F(w, v)``.

Composite functors carry their factors so that the edges of ``G o F`` can be
expanded to paths ``(intermediate u, F-edge i, G-edge j)``, enumerated
lexicographically.  Two composites built from the same chain of atomic
functors with different bracketings are related by an explicit permutation
(see :func:`associator`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import StructuralError

__all__ = [
    "WeightedCategory",
    "GraphFunctor",
    "PathBasis",
    "NatTrans",
    "DualitySolution",
    "CatObject",
    "compose_functors",
    "adjoint_functor",
    "identity_functor",
    "categorical_trace",
    "nt_trace",
    "nt_inner",
    "whisker_left",
    "whisker_right",
    "nt_vertical",
    "nt_star",
    "nt_tensor",
    "nt_identity",
    "nt_zero",
    "tracial_solution",
    "cup",
    "cap",
    "cup_pair",
    "associator",
    "nt_trace_compat_check",
    "base_object",
    "apply_functor",
    "functor_on_morphism",
    "nt_component",
    "reorder_morphism",
]


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# categories and functors
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedCategory:
    """Simple objects of a finite semisimple category with a weight function."""

    labels: tuple
    weights: np.ndarray

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        weights = _frozen(self.weights, float)
        if weights.shape != (len(labels),):
            raise StructuralError(
                f"{len(labels)} labels but weight vector of shape {weights.shape}"
            )
        if len(set(labels)) != len(labels):
            raise StructuralError(f"labels are not unique: {labels}")
        if len(labels) == 0:
            raise StructuralError("a category needs at least one simple object")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise StructuralError(f"weights must be strictly positive, got {weights}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return len(self.labels)

    def same_simples(self, other):
        return self is other or self.labels == other.labels

    def with_weights(self, weights):
        return WeightedCategory(self.labels, weights)

    @classmethod
    def uniform(cls, n, prefix="v"):
        return cls(tuple(f"{prefix}{i}" for i in range(n)), np.full(n, 1.0 / n))

    def __repr__(self):
        return f"WeightedCategory({list(self.labels)}, {np.round(self.weights, 6).tolist()})"


def _check_composable(cat_a, cat_b, what):
    if not cat_a.same_simples(cat_b):
        raise StructuralError(f"{what}: categories {cat_a.labels} and {cat_b.labels} differ")


@dataclass(frozen=True, eq=False)
class GraphFunctor:
    """Bi-faithful functor given by an edge-multiplicity matrix.

    ``factors`` is ``(first, second)`` for a composite ``second o first``;
    the edge set of a composite at ``(v, w)`` is its :class:`PathBasis`.
    """

    source: WeightedCategory
    target: WeightedCategory
    adjacency: np.ndarray
    factors: tuple | None = None
    is_identity: bool = False
    name: str = ""

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2:
            raise StructuralError("adjacency must be a matrix")
        if adj.size and (np.any(adj < 0) or np.any(adj != np.round(adj))):
            raise StructuralError("adjacency must hold nonnegative integers")
        adj = _frozen(np.round(adj), np.int64)
        if adj.shape != (self.target.size, self.source.size):
            raise StructuralError(
                f"adjacency shape {adj.shape} does not match "
                f"|target| x |source| = {(self.target.size, self.source.size)}"
            )
        object.__setattr__(self, "adjacency", adj)

    @property
    def shape(self):
        return self.adjacency.shape

    def bifaithful_defects(self):
        """Indices of zero rows (target simples) and zero columns (source simples)."""
        rows = [int(i) for i in np.flatnonzero(self.adjacency.sum(axis=1) == 0)]
        cols = [int(j) for j in np.flatnonzero(self.adjacency.sum(axis=0) == 0)]
        return rows, cols

    def is_bifaithful(self):
        rows, cols = self.bifaithful_defects()
        return not rows and not cols

    def require_bifaithful(self, where=""):
        rows, cols = self.bifaithful_defects()
        if rows or cols:
            raise StructuralError(
                f"functor {self.name or where} is not bi-faithful: "
                f"isolated target simples {rows}, isolated source simples {cols}"
            )

    def n(self, v, w):
        """Number of edges from source simple ``v`` to target simple ``w``."""
        return int(self.adjacency[w, v])

    @cached_property
    def path_basis(self):
        if self.factors is None:
            return None
        first, second = self.factors
        return PathBasis(first, second)

    def expand(self, v, w, idx):
        """Atomic steps ``((edge, vertex), ...)`` of edge ``idx`` from ``v`` to ``w``.

        Identity functors contribute no step, so bracketing and unit factors
        do not change the expansion.
        """
        if self.is_identity:
            return ()
        if self.factors is None:
            return ((int(idx), int(w)),)
        first, second = self.factors
        u, i, j = self.path_basis.decode(v, w, idx)
        return first.expand(v, u, i) + second.expand(u, w, j)

    def same_shape(self, other):
        return (
            self.source.same_simples(other.source)
            and self.target.same_simples(other.target)
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __repr__(self):
        tag = self.name or ("id" if self.is_identity else "F")
        return f"GraphFunctor({tag}, {self.adjacency.tolist()})"


def identity_functor(cat):
    n = cat.size
    return GraphFunctor(cat, cat, np.eye(n, dtype=np.int64), is_identity=True, name="id")


def adjoint_functor(F):
    """Adjoint functor: transposed adjacency, source and target swapped."""
    return GraphFunctor(F.target, F.source, F.adjacency.T.copy(),
                        is_identity=F.is_identity, name=(F.name + "'") if F.name else "")


class PathBasis:
    """Ordered path enumeration for ``second o first`` at each ``(v, w)``.

    Paths are ``(u, i, j)`` with ``i`` an edge ``v -> u`` of ``first`` and ``j``
    an edge ``u -> w`` of ``second``, ordered lexicographically.
    """

    def __init__(self, first, second):
        _check_composable(first.target, second.source, "compose_functors")
        self.first = first
        self.second = second
        a1 = first.adjacency  # (mid, src)
        a2 = second.adjacency  # (tgt, mid)
        # count[v, w, u] = a1[u, v] * a2[w, u]
        count = np.einsum("uv,wu->vwu", a1, a2)
        self.offsets = np.concatenate(
            [np.zeros(count.shape[:2] + (1,), dtype=np.int64), np.cumsum(count, axis=2)], axis=2
        )
        self.counts = self.offsets[:, :, -1]

    def size(self, v, w):
        return int(self.counts[v, w])

    def paths(self, v, w):
        a1, a2 = self.first.adjacency, self.second.adjacency
        out = []
        for u in range(a1.shape[0]):
            for i in range(a1[u, v]):
                for j in range(a2[w, u]):
                    out.append((u, i, j))
        return out

    def index(self, v, w, u, i, j):
        return int(self.offsets[v, w, u] + i * self.second.adjacency[w, u] + j)

    def decode(self, v, w, idx):
        off = self.offsets[v, w]
        if not 0 <= idx < off[-1]:
            raise IndexError(f"path index {idx} out of range at {(v, w)}")
        u = int(np.searchsorted(off, idx, side="right") - 1)
        r = idx - off[u]
        nj = self.second.adjacency[w, u]
        return u, int(r // nj), int(r % nj)

    def group(self, v, w, u):
        """Slice of the paths through intermediate ``u``."""
        return slice(int(self.offsets[v, w, u]), int(self.offsets[v, w, u + 1]))


def compose_functors(first, second, name=None):
    """Composite ``second o first`` (``first`` applied first) and its path basis."""
    _check_composable(first.target, second.source, "compose_functors")
    adj = second.adjacency @ first.adjacency
    comp = GraphFunctor(
        first.source,
        second.target,
        adj,
        factors=(first, second),
        name=name if name is not None else f"{second.name}{first.name}",
    )
    return comp, comp.path_basis


# --------------------------------------------------------------------------
# natural transformations
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NatTrans:
    """Block representative of a natural transformation ``domain -> codomain``."""

    domain: GraphFunctor
    codomain: GraphFunctor
    blocks: dict = field(repr=False)

    def __post_init__(self):
        F, G = self.domain, self.codomain
        _check_composable(F.source, G.source, "NatTrans")
        _check_composable(F.target, G.target, "NatTrans")
        clean = {}
        for v in range(F.source.size):
            for w in range(F.target.size):
                shape = (G.n(v, w), F.n(v, w))
                blk = self.blocks.get((v, w))
                if blk is None:
                    if shape[0] * shape[1] == 0:
                        blk = np.zeros(shape, dtype=complex)
                    else:
                        raise StructuralError(f"missing block {(v, w)} of shape {shape}")
                blk = np.asarray(blk, dtype=complex)
                if blk.shape != shape:
                    raise StructuralError(
                        f"block {(v, w)} has shape {blk.shape}, expected {shape}"
                    )
                blk = blk.copy()
                blk.setflags(write=False)
                clean[(v, w)] = blk
        object.__setattr__(self, "blocks", clean)

    def __getitem__(self, key):
        return self.blocks[key]

    @property
    def keys(self):
        return sorted(self.blocks)

    def flatten(self):
        """Blocks in ``(v, w)`` lexicographic order, each block row-major."""
        parts = [self.blocks[k].ravel() for k in self.keys]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    @classmethod
    def unflatten(cls, domain, codomain, vec):
        vec = np.asarray(vec, dtype=complex)
        need = int((codomain.adjacency * domain.adjacency).sum())
        if vec.shape != (need,):
            raise StructuralError(f"vector of shape {vec.shape} does not match block table ({need})")
        blocks, pos = {}, 0
        for v in range(domain.source.size):
            for w in range(domain.target.size):
                r, c = codomain.n(v, w), domain.n(v, w)
                blocks[(v, w)] = vec[pos:pos + r * c].reshape(r, c)
                pos += r * c
        return cls(domain, codomain, blocks)

    def _binary(self, other, op):
        if not (self.domain.same_shape(other.domain) and self.codomain.same_shape(other.codomain)):
            raise StructuralError("natural transformations are not parallel")
        return NatTrans(self.domain, self.codomain,
                        {k: op(self.blocks[k], other.blocks[k]) for k in self.blocks})

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return NatTrans(self.domain, self.codomain, {k: scalar * b for k, b in self.blocks.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def max_abs(self):
        return max((float(np.abs(b).max()) for b in self.blocks.values() if b.size), default=0.0)

    def dim(self):
        return sum(b.size for b in self.blocks.values())


def nt_zero(F, G):
    return NatTrans(F, G, {(v, w): np.zeros((G.n(v, w), F.n(v, w)), dtype=complex)
                           for v in range(F.source.size) for w in range(F.target.size)})


def nt_identity(F):
    return NatTrans(F, F, {(v, w): np.eye(F.n(v, w), dtype=complex)
                           for v in range(F.source.size) for w in range(F.target.size)})


def nt_vertical(eta, kappa):
    """``eta o kappa``: apply ``kappa`` first."""
    if not kappa.codomain.same_shape(eta.domain):
        raise StructuralError("nt_vertical: codomain of the inner does not match the outer domain")
    return NatTrans(kappa.domain, eta.codomain,
                    {k: eta.blocks[k] @ kappa.blocks[k] for k in kappa.blocks})


def nt_star(eta):
    return NatTrans(eta.codomain, eta.domain, {k: b.conj().T for k, b in eta.blocks.items()})


def whisker_left(F, eta):
    """``F(eta)``: ``F o G -> F o H`` for ``eta: G -> H``."""
    G, H = eta.domain, eta.codomain
    _check_composable(G.target, F.source, "whisker_left")
    FG, bg = compose_functors(G, F)
    FH, bh = compose_functors(H, F)
    blocks = {}
    for v in range(G.source.size):
        for q in range(F.target.size):
            out = np.zeros((FH.n(v, q), FG.n(v, q)), dtype=complex)
            for w in range(G.target.size):
                nf = F.n(w, q)
                if nf == 0:
                    continue
                out[bh.group(v, q, w), bg.group(v, q, w)] = np.kron(eta.blocks[(v, w)], np.eye(nf))
            blocks[(v, q)] = out
    return NatTrans(FG, FH, blocks)


def whisker_right(eta, F):
    """``eta_F``: ``G o F -> H o F`` for ``eta: G -> H``."""
    G, H = eta.domain, eta.codomain
    _check_composable(F.target, G.source, "whisker_right")
    GF, bg = compose_functors(F, G)
    HF, bh = compose_functors(F, H)
    blocks = {}
    for v in range(F.source.size):
        for q in range(G.target.size):
            out = np.zeros((HF.n(v, q), GF.n(v, q)), dtype=complex)
            for u in range(F.target.size):
                nf = F.n(v, u)
                if nf == 0:
                    continue
                out[bh.group(v, q, u), bg.group(v, q, u)] = np.kron(np.eye(nf), eta.blocks[(u, q)])
            blocks[(v, q)] = out
    return NatTrans(GF, HF, blocks)


def nt_tensor(eta, kappa):
    """Horizontal product ``eta (.) kappa = eta_{F2} o G1(kappa)``.

    ``eta: G1 -> G2`` and ``kappa: F1 -> F2`` with ``F_i`` composable before ``G_i``.
    """
    left = whisker_left(eta.domain, kappa)  # G1F1 -> G1F2
    right = whisker_right(eta, kappa.codomain)  # G1F2 -> G2F2
    return nt_vertical(right, left)


def associator(F1, F2):
    """Unitary natural transformation ``F1 -> F2`` between two bracketings.

    Both functors must expand to the same chain of atomic functors (identity
    factors are ignored); the blocks are permutation matrices matching paths by
    their atomic expansion.
    """
    _check_composable(F1.source, F2.source, "associator")
    _check_composable(F1.target, F2.target, "associator")
    blocks = {}
    for v in range(F1.source.size):
        for w in range(F1.target.size):
            n1, n2 = F1.n(v, w), F2.n(v, w)
            if n1 != n2:
                raise StructuralError(f"associator: path counts differ at {(v, w)}: {n1} vs {n2}")
            key2 = {F2.expand(v, w, j): j for j in range(n2)}
            if len(key2) != n2:
                raise StructuralError("associator: target paths are not distinguishable")
            P = np.zeros((n2, n1), dtype=complex)
            for i in range(n1):
                k = F1.expand(v, w, i)
                if k not in key2:
                    raise StructuralError(f"associator: path {k} has no partner at {(v, w)}")
                P[key2[k], i] = 1.0
            blocks[(v, w)] = P
    return NatTrans(F1, F2, blocks)


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------


def categorical_trace(x, alpha, cat):
    """``sum_v mu_v tr(alpha_v)`` for an endomorphism of ``x = sum_v x_v v``."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (cat.size,) or len(alpha) != cat.size:
        raise StructuralError("categorical_trace: object and category sizes differ")
    total = 0j
    for v in range(cat.size):
        a = np.asarray(alpha[v])
        if a.shape != (x[v], x[v]):
            raise StructuralError(f"block {v} has shape {a.shape}, expected {(x[v], x[v])}")
        total += cat.weights[v] * np.trace(a)
    return complex(total)


def _weights(eta, mu, nu):
    mu = eta.domain.source.weights if mu is None else np.asarray(mu, float)
    nu = eta.domain.target.weights if nu is None else np.asarray(nu, float)
    return mu, nu


def nt_trace(eta, mu=None, nu=None):
    """``Tr(eta) = sum_{v,w} mu_v nu_w tr(eta_(v,w))`` on an endo-transformation."""
    if not eta.domain.same_shape(eta.codomain):
        raise StructuralError("nt_trace needs an endo natural transformation")
    mu, nu = _weights(eta, mu, nu)
    return complex(sum(mu[v] * nu[w] * np.trace(b) for (v, w), b in eta.blocks.items()))


def nt_inner(eta, kappa, mu=None, nu=None):
    """``<eta, kappa> = Tr(kappa* eta)``, linear in ``eta``."""
    if not (eta.domain.same_shape(kappa.domain) and eta.codomain.same_shape(kappa.codomain)):
        raise StructuralError("nt_inner: transformations are not parallel")
    mu, nu = _weights(eta, mu, nu)
    return complex(sum(mu[v] * nu[w] * np.vdot(kappa.blocks[(v, w)], b)
                       for (v, w), b in eta.blocks.items()))


# --------------------------------------------------------------------------
# tracial duality data
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DualitySolution:
    """Tracial solution of the conjugate equations for ``functor``.

    ``kappa[w, v] = weight_target(w) / weight_source(v)``.
    """

    functor: GraphFunctor
    kappa: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray

    def loop_source(self):
        """Per source simple ``v``: ``sum_w N(w, v) kappa(w, v)``."""
        return (self.functor.adjacency * self.kappa).sum(axis=0)

    def loop_target(self):
        """Per target simple ``w``: ``sum_v N(w, v) / kappa(w, v)``."""
        return (self.functor.adjacency / self.kappa).sum(axis=1)


def tracial_solution(F, source_weights=None, target_weights=None):
    mu = F.source.weights if source_weights is None else np.asarray(source_weights, float)
    nu = F.target.weights if target_weights is None else np.asarray(target_weights, float)
    if mu.shape != (F.source.size,) or nu.shape != (F.target.size,):
        raise StructuralError("tracial_solution: weight vectors do not fit the functor")
    kappa = np.outer(nu, 1.0 / mu)
    return DualitySolution(F, _frozen(kappa, float), _frozen(mu, float), _frozen(nu, float))


def cup(F, d=None):
    """``rho': id -> F'F``; component at ``v`` is ``sum_{w,e} kappa(w,v)^(1/2) |e, e>``."""
    d = tracial_solution(F) if d is None else d
    if d.functor is not F and not d.functor.same_shape(F):
        raise StructuralError("cup: duality data belongs to another functor")
    Fp = adjoint_functor(F)
    FpF, basis = compose_functors(F, Fp)
    idC = identity_functor(F.source)
    blocks = {}
    for v in range(F.source.size):
        for v2 in range(F.source.size):
            col = np.zeros((FpF.n(v, v2), idC.n(v, v2)), dtype=complex)
            if v == v2:
                for w in range(F.target.size):
                    for e in range(F.n(v, w)):
                        col[basis.index(v, v, w, e, e), 0] = np.sqrt(d.kappa[w, v])
            blocks[(v, v2)] = col
    return NatTrans(idC, FpF, blocks)


def cup_pair(F, d=None):
    """``rho: id -> F F'`` with coefficients ``kappa(w, v)^(-1/2)``."""
    d = tracial_solution(F) if d is None else d
    Fp = adjoint_functor(F)
    FFp, basis = compose_functors(Fp, F)
    idD = identity_functor(F.target)
    blocks = {}
    for w in range(F.target.size):
        for w2 in range(F.target.size):
            col = np.zeros((FFp.n(w, w2), idD.n(w, w2)), dtype=complex)
            if w == w2:
                for v in range(F.source.size):
                    for e in range(F.n(v, w)):
                        col[basis.index(w, w, v, e, e), 0] = 1.0 / np.sqrt(d.kappa[w, v])
            blocks[(w, w2)] = col
    return NatTrans(idD, FFp, blocks)


def cap(F, d=None):
    return nt_star(cup(F, d))


def nt_trace_compat_check(F, G, eta):
    """Residual of ``Tr^F(b*_F G'(eta) b_F) = Tr^{GF}(eta) = Tr^G(G(r*) eta_{F'} G(r))``.

    ``F: M -> N`` and ``G: N -> Q`` carry their categories' weights;
    ``eta`` is an endomorphism of ``G o F`` (any bracketing with that chain).
    ``b`` is the tracial cup of ``G`` and ``r`` the cup ``id -> F F'``.
    """
    GF, _ = compose_functors(F, G)
    if not (eta.domain.same_shape(GF) and eta.codomain.same_shape(GF)):
        raise StructuralError("nt_trace_compat_check: eta is not an endomorphism of G o F")
    a = associator(eta.domain, GF)
    eta = nt_vertical(a, nt_vertical(eta, nt_star(a)))
    middle = nt_trace(eta)

    # left side
    Gp = adjoint_functor(G)
    beta = cup(G)  # id_N -> G'G
    beta_F = whisker_right(beta, F)  # id o F -> (G'G) o F
    Gp_eta = whisker_left(Gp, eta)  # G'(GF) -> G'(GF)
    to_nested = associator(beta_F.codomain, Gp_eta.domain)
    unit_l = associator(F, beta_F.domain)
    lhs_nt = nt_vertical(
        nt_star(unit_l),
        nt_vertical(nt_star(beta_F),
                    nt_vertical(nt_star(to_nested),
                                nt_vertical(Gp_eta, nt_vertical(to_nested, nt_vertical(beta_F, unit_l))))),
    )
    lhs = nt_trace(lhs_nt)

    # right side
    Fp = adjoint_functor(F)
    rho = cup_pair(F)  # id_N -> F F'
    G_rho = whisker_left(G, rho)  # G o id -> G o (F F')
    eta_Fp = whisker_right(eta, Fp)  # (GF) F' -> (GF) F'
    to_nested = associator(G_rho.codomain, eta_Fp.domain)
    unit_r = associator(G, G_rho.domain)
    rhs_nt = nt_vertical(
        nt_star(unit_r),
        nt_vertical(nt_star(G_rho),
                    nt_vertical(nt_star(to_nested),
                                nt_vertical(eta_Fp, nt_vertical(to_nested, nt_vertical(G_rho, unit_r))))),
    )
    rhs = nt_trace(rhs_nt)
    return max(abs(lhs - middle), abs(rhs - middle))


# --------------------------------------------------------------------------
# objects with labelled bases (used by the tower and the path-space oracle)
# --------------------------------------------------------------------------


class CatObject:
    """A direct sum of simples whose basis vectors are labelled by walks.

    ``labels[v]`` lists the walk labels of the copies of simple ``v``.  A walk
    starts with its base vertex and appends one ``(edge, vertex)`` step per
    atomic functor that was applied.
    """

    def __init__(self, category, labels):
        self.category = category
        self.labels = tuple(tuple(ls) for ls in labels)
        if len(self.labels) != category.size:
            raise StructuralError("CatObject: one label list per simple required")
        self._index = [dict((lab, i) for i, lab in enumerate(ls)) for ls in self.labels]

    @property
    def dims(self):
        return np.array([len(ls) for ls in self.labels], dtype=np.int64)

    def index(self, v, label):
        return self._index[v][label]

    def identity(self):
        return [np.eye(len(ls), dtype=complex) for ls in self.labels]


def base_object(cat):
    """``m_0``: one copy of every simple."""
    return CatObject(cat, [[(v,)] for v in range(cat.size)])


def apply_functor(F, x):
    """``F(x)``; basis at ``w`` ordered by ``(v, copy of v in x, edge of F)``."""
    _check_composable(F.source, x.category, "apply_functor")
    if F.is_identity:
        return CatObject(F.target, x.labels)
    labels = []
    for w in range(F.target.size):
        ls = []
        for v in range(F.source.size):
            n = F.n(v, w)
            for lab in x.labels[v]:
                for e in range(n):
                    ls.append(lab + F.expand(v, w, e))
        labels.append(ls)
    return CatObject(F.target, labels)


def functor_on_morphism(F, f):
    """``F(f)`` for ``f = [f_v]`` a morphism between objects of the source."""
    out = []
    for w in range(F.target.size):
        parts = [np.kron(f[v], np.eye(F.n(v, w))) for v in range(F.source.size)]
        out.append(_block_diag(parts))
    return out


def nt_component(eta, x):
    """Component ``eta_x: F(x) -> G(x)`` in the bases of :func:`apply_functor`."""
    out = []
    for w in range(eta.domain.target.size):
        parts = [np.kron(np.eye(int(x.dims[v])), eta.blocks[(v, w)]) for v in range(x.category.size)]
        out.append(_block_diag(parts))
    return out


def reorder_morphism(f, dom_from, dom_to, cod_from, cod_to):
    """Re-express ``f: dom_from -> cod_from`` in the bases of ``dom_to``/``cod_to``.

    The two versions of each object must carry the same walk labels.
    """
    out = []
    for v, blk in enumerate(f):
        rows = _perm_idx(cod_from, cod_to, v)
        cols = _perm_idx(dom_from, dom_to, v)
        out.append(_apply_perm(blk, rows, cols))
    return out


def _perm_idx(src, dst, v):
    idx = np.array([dst.index(v, lab) for lab in src.labels[v]], dtype=np.int64)
    if len(idx) != len(dst.labels[v]):
        raise StructuralError("reorder: objects have different dimensions")
    return idx


def _apply_perm(blk, rows, cols):
    out = np.zeros_like(blk)
    out[np.ix_(rows, cols)] = blk
    return out


def _block_diag(parts):
    r = sum(p.shape[0] for p in parts)
    c = sum(p.shape[1] for p in parts)
    out = np.zeros((r, c), dtype=complex)
    i = j = 0
    for p in parts:
        out[i:i + p.shape[0], j:j + p.shape[1]] = p
        i += p.shape[0]
        j += p.shape[1]
    return out
