"""Unitary connections between tracial Bratteli diagrams (1-cells).

A connection from ``(Gamma, mu)`` to ``(Delta, nu)`` consists of functors
``Lambda_k`` from source level ``k`` to target level ``k`` and unitaries

    W_k : Delta_k Lambda_{k-1}  ->  Lambda_k Gamma_k

stored blockwise.  The block at ``(m, n)`` (``m`` a source simple at level
``k-1``, ``n`` a target simple at level ``k``) maps the paths
``(n', lambda-edge, delta-edge)`` to the paths ``(m'', gamma-edge, lambda-edge)``.
"""
from __future__ import annotations

import functools
import itertools

import numpy as np

from . import config
from .bratteli import TracialBratteli
from .errors import StructuralError
from .semisimple import (
    GraphFunctor,
    NatTrans,
    associator,
    compose_functors,
    nt_vertical,
    whisker_left,
    whisker_right,
)

__all__ = [
    "UnitaryConnection",
    "validate_one_cell",
    "tensor_one_cells",
    "build_vertex_model",
    "build_graph_identity",
    "build_random_connection",
    "find_lambda_adjacencies",
    "haar_unitary",
    "flip_matrix",
    "gauge_transform",
]


class UnitaryConnection:
    """1-cell with a finite presentation aligned with its 0-cells.

    Parameters
    ----------
    source, target : TracialBratteli
        Must share pre-period and period.
    lambdas : list of int matrices
        ``Lambda_0 .. Lambda_{L+K}``; ``Lambda_{L+K}`` must equal ``Lambda_L``.
    w_blocks : list of dict
        Entry ``k-1`` maps ``(m, n)`` to the block of ``W_k``.
    """

    def __init__(self, source, target, lambdas, w_blocks, name=""):
        if not source.same_presentation(target):
            raise StructuralError(
                f"0-cells have different presentations: (L,K)=({source.preperiod},{source.period}) "
                f"vs ({target.preperiod},{target.period})"
            )
        self.source = source
        self.target = target
        self.name = name
        top = source.stored_depth
        if len(lambdas) != top + 1:
            raise StructuralError(f"expected {top + 1} Lambda matrices, got {len(lambdas)}")
        if len(w_blocks) != top:
            raise StructuralError(f"expected {top} connection levels, got {len(w_blocks)}")
        lams = []
        for k, a in enumerate(lambdas):
            a = np.asarray(a.adjacency if isinstance(a, GraphFunctor) else a)
            exp = (target.levels[k].size, source.levels[k].size)
            if a.shape != exp:
                raise StructuralError(f"Lambda_{k} has shape {a.shape}, expected {exp}")
            lams.append(np.array(np.round(a), dtype=np.int64))
        L = source.preperiod
        if not np.array_equal(lams[top], lams[L]):
            raise StructuralError(f"periodic tail: Lambda_{top} differs from Lambda_{L}")
        self.lambdas = tuple(lams)
        for a in self.lambdas:
            a.setflags(write=False)
        self._cache = {}
        self.w_blocks = []
        for k in range(1, top + 1):
            self.w_blocks.append(self._check_level(k, w_blocks[k - 1]))
        self.w_blocks = tuple(self.w_blocks)

    def _check_level(self, k, blocks):
        G = self.source.adjacency(k)
        D = self.target.adjacency(k)
        dl = D @ self.lambdas[k - 1]
        lg = self.lambdas[k] @ G
        if not np.array_equal(dl, lg):
            bad = np.argwhere(dl != lg)[0]
            n, m = int(bad[0]), int(bad[1])
            raise StructuralError(
                f"shape condition fails at level {k}, (m={m}, n={n}): "
                f"(Delta Lambda)={dl[n, m]} but (Lambda Gamma)={lg[n, m]}"
            )
        clean = {}
        for m in range(dl.shape[1]):
            for n in range(dl.shape[0]):
                size = int(dl[n, m])
                blk = blocks.get((m, n))
                if blk is None:
                    if size == 0:
                        blk = np.zeros((0, 0), dtype=complex)
                    else:
                        raise StructuralError(f"missing connection block at level {k}, (m={m}, n={n})")
                blk = np.array(blk, dtype=complex)
                if blk.shape != (size, size):
                    raise StructuralError(
                        f"connection block at level {k}, (m={m}, n={n}) has shape {blk.shape}, "
                        f"expected {(size, size)}"
                    )
                blk.setflags(write=False)
                clean[(m, n)] = blk
        return clean

    # -- level access --------------------------------------------------------

    @property
    def preperiod(self):
        return self.source.preperiod

    @property
    def period(self):
        return self.source.period

    def canonical(self, k):
        return self.source.canonical(k)

    def lam_adj(self, k):
        return self.lambdas[self.canonical(k)]

    def lam(self, k):
        """``Lambda_k`` as a functor between the materialized level-``k`` categories."""
        key = ("lam", k)
        if key not in self._cache:
            self._cache[key] = GraphFunctor(self.source.level(k), self.target.level(k),
                                            self.lam_adj(k), name=f"L{k}")
        return self._cache[key]

    def w(self, k):
        """Blocks of ``W_k`` (``k >= 1``)."""
        if k < 1:
            raise ValueError("connections start at level 1")
        return self.w_blocks[self.canonical(k) - 1]

    def path_functors(self, k):
        """``(Delta_k o Lambda_{k-1}, Lambda_k o Gamma_k)`` with their path bases."""
        key = ("paths", k)
        if key not in self._cache:
            dl, _ = compose_functors(self.lam(k - 1), self.target.functor(k))
            lg, _ = compose_functors(self.source.functor(k), self.lam(k))
            self._cache[key] = (dl, lg)
        return self._cache[key]

    def w_nat(self, k):
        """``W_k`` as a natural transformation ``Delta_k Lambda_{k-1} -> Lambda_k Gamma_k``."""
        dl, lg = self.path_functors(k)
        return NatTrans(dl, lg, self.w(k))

    def is_parallel(self, other):
        return (self.source is other.source or _same_tower(self.source, other.source)) and \
            (self.target is other.target or _same_tower(self.target, other.target))

    def with_blocks(self, w_blocks, name=None):
        return UnitaryConnection(self.source, self.target, self.lambdas, w_blocks,
                                 name=self.name if name is None else name)

    def __repr__(self):
        return (f"UnitaryConnection({self.name!r}, L={self.preperiod}, K={self.period}, "
                f"Lambda={[a.tolist() for a in self.lambdas]})")


def _same_tower(a, b):
    if not a.same_presentation(b) or abs(a.pf_scalar - b.pf_scalar) > 1e-12 * a.pf_scalar:
        return False
    for x, y in zip(a.levels, b.levels):
        if not x.same_simples(y) or not np.allclose(x.weights, y.weights, rtol=1e-12, atol=0):
            return False
    return all(np.array_equal(f.adjacency, g.adjacency) for f, g in zip(a.functors, b.functors))


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def _unitarity_residual(W):
    if W.size == 0:
        return 0.0
    eye = np.eye(W.shape[0])
    return float(max(np.abs(W @ W.conj().T - eye).max(), np.abs(W.conj().T @ W - eye).max()))


def validate_one_cell(c, tol=None):
    """Unitarity, bi-faithfulness and the two-sided weight bound.

    ``eps`` and ``M`` are the extreme values of ``(Lambda_k' nu^k)_m / mu^k_m``
    over the stored levels; with equal PF scalars on both sides the ratios are
    periodic, so this scan covers every level.
    """
    tol = config.default_tol() if tol is None else tol
    errors = []
    worst, where = 0.0, None
    for k in range(1, c.source.stored_depth + 1):
        for (m, n), W in c.w(k).items():
            r = _unitarity_residual(W)
            if r > worst:
                worst, where = r, (k, m, n)
    if worst > tol:
        k, m, n = where
        errors.append(f"connection block at level {k}, (m={m}, n={n}) is not unitary: "
                      f"residual {worst:.3e}")
    ratios = []
    top = c.source.stored_depth
    for k in range(0, top + 1):
        rows, cols = GraphFunctor(c.source.levels[k], c.target.levels[k], c.lambdas[k]).bifaithful_defects()
        if rows or cols:
            errors.append(f"Lambda_{k} not bi-faithful: isolated targets {rows}, sources {cols}")
        ratio = (c.lambdas[k].T @ c.target.weights(k)) / c.source.weights(k)
        ratios.append(ratio)
    allr = np.concatenate(ratios)
    eps, M = float(allr.min()), float(allr.max())
    ds, dt = c.source.pf_scalar, c.target.pf_scalar
    bounded = abs(ds - dt) <= 1e-9 * max(ds, dt)
    if not bounded:
        errors.append(f"weights scale differently on the two sides (d={ds:.6g} vs {dt:.6g}); "
                      "the ratio bound cannot hold uniformly")
    return {
        "ok": not errors,
        "errors": errors,
        "unitarity_residual": worst,
        "worst_block": where,
        "eps": eps,
        "M": M,
        "bounded": bounded,
        "levels_scanned": [0, top],
    }


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------


def tensor_one_cells(outer, inner, name=None):
    """``outer (x) inner``: functors ``Omega_k Lambda_k``, connection ``(1 W^L)(W^O 1)``.

    The edges of the fused functor at ``(m, q)`` are the paths
    ``(n, lambda-edge, omega-edge)`` of ``Omega_k o Lambda_k`` in path order.
    """
    if not (inner.target is outer.source or _same_tower(inner.target, outer.source)):
        raise StructuralError("tensor_one_cells: middle 0-cells do not match")
    src, tgt = inner.source, outer.target
    top = src.stored_depth
    lambdas = [outer.lambdas[k] @ inner.lambdas[k] for k in range(top + 1)]
    blocks = []
    for k in range(1, top + 1):
        Lp, Lk = inner.lam(k - 1), inner.lam(k)
        Op, Ok = outer.lam(k - 1), outer.lam(k)
        G, S = src.functor(k), tgt.functor(k)
        wo = whisker_right(outer.w_nat(k), Lp)   # (S O_{k-1}) L_{k-1} -> (O_k D_k) L_{k-1}
        wl = whisker_left(Ok, inner.w_nat(k))    # O_k (D_k L_{k-1}) -> O_k (L_k G_k)
        mid = associator(wo.codomain, wl.domain)
        core = nt_vertical(wl, nt_vertical(mid, wo))
        fused_prev, _ = compose_functors(Lp, Op)
        fused_k, _ = compose_functors(Lk, Ok)
        dom, _ = compose_functors(fused_prev, S)   # S_k o (O L)_{k-1}
        cod, _ = compose_functors(G, fused_k)      # (O L)_k o G_k
        fused = nt_vertical(associator(core.codomain, cod),
                            nt_vertical(core, associator(dom, core.domain)))
        blocks.append({(m, q): fused.blocks[(m, q)] for (m, q) in fused.blocks})
    label = name if name is not None else f"{outer.name}*{inner.name}"
    return UnitaryConnection(src, tgt, lambdas, blocks, name=label)


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def haar_unitary(n, rng):
    """Haar-distributed unitary: QR of a complex Gaussian with phase-fixed ``R``."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def flip_matrix(nx, ny):
    """``F: C^Y (x) C^X -> C^X (x) C^Y``, ``|y, x> -> |x, y>``."""
    F = np.zeros((nx * ny, nx * ny))
    for x in range(nx):
        for y in range(ny):
            F[x * ny + y, y * nx + x] = 1.0
    return F


def build_vertex_model(U, nx, ny, name="vertex", tol=1e-12):
    """Vertex-model 1-cell: one simple per level, ``Gamma = [[|X|]]``, ``Lambda = [[|Y|]]``.

    ``U`` acts on ``C^X (x) C^Y`` with basis index ``x * |Y| + y``; the
    connection is ``W = U F``.
    """
    U = np.asarray(U, dtype=complex)
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise StructuralError("X and Y must be nonempty")
    if U.shape != (nx * ny, nx * ny):
        raise StructuralError(f"U has shape {U.shape}, expected {(nx * ny, nx * ny)}")
    res = _unitarity_residual(U)
    if res > tol:
        raise StructuralError(f"U is not unitary (residual {res:.3e})")
    tower = TracialBratteli.single_simple(nx, name=f"X{nx}")
    W = U @ flip_matrix(nx, ny)
    return UnitaryConnection(tower, tower, [[[ny]], [[ny]]], [{(0, 0): W}], name=name)


def build_graph_identity(g, name="graph-id"):
    """``Lambda_k = Gamma`` with identity connection on a constant tower."""
    if g.preperiod != 0 or g.period != 1:
        raise StructuralError("graph identity needs a constant tower (pre-period 0, period 1)")
    G = g.adjacency(1)
    if G.shape[0] != G.shape[1] or not g.levels[0].same_simples(g.levels[1]):
        raise StructuralError("graph identity needs a square graph on a fixed vertex set")
    GG = G @ G
    blocks = {(m, n): np.eye(int(GG[n, m]), dtype=complex)
              for m in range(G.shape[1]) for n in range(G.shape[0])}
    return UnitaryConnection(g, g, [G, G], [blocks], name=name)


def build_random_connection(source, target, lambdas=None, seed=0, rng=None, name="random",
                            max_mult=3):
    """Haar-random blocks on a feasible shape.

    When ``lambdas`` is omitted the first feasible family found by
    :func:`find_lambda_adjacencies` is used.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    if lambdas is None:
        found = find_lambda_adjacencies(source, target, max_mult=max_mult, limit=1, rng=rng)
        if not found:
            raise StructuralError("no feasible Lambda adjacencies found within the search bound")
        lambdas = found[0]
    lambdas = [np.asarray(a, dtype=np.int64) for a in lambdas]
    top = source.stored_depth
    if len(lambdas) != top + 1:
        raise StructuralError(f"expected {top + 1} Lambda matrices")
    blocks = []
    for k in range(1, top + 1):
        dl = target.adjacency(k) @ lambdas[k - 1]
        lg = lambdas[k] @ source.adjacency(k)
        if not np.array_equal(dl, lg):
            bad = np.argwhere(dl != lg)[0]
            raise StructuralError(f"infeasible shapes at level {k}, (m={bad[1]}, n={bad[0]})")
        lvl = {}
        for m in range(dl.shape[1]):
            for n in range(dl.shape[0]):
                lvl[(m, n)] = haar_unitary(int(dl[n, m]), rng)
        blocks.append(lvl)
    return UnitaryConnection(source, target, lambdas, blocks, name=name)


def gauge_transform(c, rng=None, unitaries=None, name=None):
    """Gauge-equivalent copy ``W'_k = (u_k)_Gamma W_k Delta(u_{k-1})*``.

    ``u_k`` are unitary endomorphisms of ``Lambda_k`` for ``k = 0 .. L+K-1``
    (random when omitted); ``u_{L+K}`` is taken equal to ``u_L``.  Returns the
    new 1-cell and the ``u_k``; the sequence ``u`` is a flat 2-cell from ``c``
    to the copy.
    """
    L, top = c.preperiod, c.source.stored_depth
    if unitaries is None:
        rng = np.random.default_rng(0) if rng is None else rng
        unitaries = []
        for k in range(top):
            lam = c.lam(k)
            unitaries.append(NatTrans(lam, lam, {
                (m, n): haar_unitary(lam.n(m, n), rng)
                for m in range(lam.source.size) for n in range(lam.target.size)}))
    us = list(unitaries)[:top]
    if len(us) != top:
        raise StructuralError(f"expected {top} gauge unitaries")
    us.append(NatTrans(c.lam(top), c.lam(top), dict(us[L].blocks)))
    blocks = []
    for k in range(1, top + 1):
        left = whisker_right(us[k], c.source.functor(k))
        right = whisker_left(c.target.functor(k), us[k - 1])
        Wk = c.w(k)
        blocks.append({key: left.blocks[key] @ Wk[key] @ right.blocks[key].conj().T for key in Wk})
    out = UnitaryConnection(c.source, c.target, c.lambdas, blocks,
                            name=f"{c.name}~" if name is None else name)
    return out, us


@functools.lru_cache(maxsize=64)
def _candidate_rows(n, max_mult):
    rows = np.array(list(itertools.product(range(max_mult + 1), repeat=n)), dtype=np.int64)
    rows.setflags(write=False)
    return rows


def _row_solutions(gamma, rhs, max_mult):
    """Nonnegative integer rows ``x`` (entries <= max_mult) with ``x @ gamma == rhs``."""
    X = _candidate_rows(gamma.shape[0], max_mult)
    hit = np.all(X @ gamma == np.asarray(rhs)[None, :], axis=1)
    return [tuple(r) for r in X[hit]]


def find_lambda_adjacencies(source, target, max_mult=3, limit=8, rng=None, budget=20000):
    """Bounded search for ``Lambda_0 .. Lambda_{L+K}`` satisfying the shape condition.

    ``Lambda_0`` ranges over matrices with entries ``<= max_mult`` (all of
    them when there are at most ``budget``, otherwise a seeded sample); later
    levels are solved row by row and the periodic closure is enforced.
    """
    top = source.stored_depth
    L = source.preperiod
    shape0 = (target.levels[0].size, source.levels[0].size)
    cells = shape0[0] * shape0[1]
    total = (max_mult + 1) ** cells
    if total <= budget:
        candidates = (np.array(c).reshape(shape0)
                      for c in itertools.product(range(max_mult + 1), repeat=cells))
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        candidates = (rng.integers(0, max_mult + 1, size=shape0) for _ in range(budget))
    found = []
    seen = set()
    for lam0 in candidates:
        if np.any(lam0.sum(axis=0) == 0) or np.any(lam0.sum(axis=1) == 0):
            continue
        key = lam0.tobytes()
        if key in seen:
            continue
        seen.add(key)
        for fam in _extend(source, target, [lam0], 1, top, max_mult):
            if np.array_equal(fam[top], fam[L]):
                found.append(fam)
                if len(found) >= limit:
                    return found
    return found


def _extend(source, target, fam, k, top, max_mult):
    if k > top:
        yield list(fam)
        return
    rhs = target.adjacency(k) @ fam[-1]
    G = source.adjacency(k)
    rows = [_row_solutions(G, rhs[n], max_mult) for n in range(rhs.shape[0])]
    if any(not r for r in rows):
        return
    for choice in itertools.product(*rows):
        lam = np.array(choice, dtype=np.int64).reshape(rhs.shape[0], G.shape[0])
        if np.any(lam.sum(axis=0) == 0) or np.any(lam.sum(axis=1) == 0):
            continue
        yield from _extend(source, target, fam + [lam], k + 1, top, max_mult)
