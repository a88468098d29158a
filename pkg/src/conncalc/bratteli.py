"""Tracial Bratteli diagrams with a finite (pre-period, period, scale) presentation.

Level ``k`` is a :class:`WeightedCategory` carrying ``mu^k`` and ``Gamma_k``
maps level ``k-1`` into level ``k``.  The stored data covers levels
``0 .. L+K``; beyond ``L`` the functors repeat with period ``K`` and the
weights shrink by ``1/d`` per period.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.sparse.csgraph import connected_components

from . import config
from .errors import ConvergenceError, StructuralError
from .semisimple import (
    GraphFunctor,
    WeightedCategory,
    apply_functor,
    base_object,
    categorical_trace,
    functor_on_morphism,
)

__all__ = [
    "TracialBratteli",
    "AfLevel",
    "validate_zero_cell",
    "pf_solve",
    "af_tower",
    "materialize_level",
    "pf_condition_residuals",
    "trace_compat_residual",
]


class TracialBratteli:
    """0-cell: tower of weighted categories and bi-faithful functors.

    Parameters
    ----------
    levels : list of WeightedCategory
        Levels ``0 .. L+K``.
    functors : list of adjacency matrices or GraphFunctor
        ``Gamma_1 .. Gamma_{L+K}``; entry ``k-1`` maps level ``k-1`` to ``k``.
    preperiod, period : int
        ``L >= 0`` and ``K >= 1``.
    pf_scalar : float
        ``d > 0`` with ``mu^{k+K} = mu^k / d`` for ``k >= L``.
    """

    def __init__(self, levels, functors, preperiod=0, period=1, pf_scalar=1.0, name=""):
        self.name = name
        self.preperiod = int(preperiod)
        self.period = int(period)
        self.pf_scalar = float(pf_scalar)
        if self.preperiod < 0 or self.period < 1:
            raise StructuralError("need preperiod >= 0 and period >= 1")
        if not self.pf_scalar > 0:
            raise StructuralError("pf_scalar must be positive")
        levels = list(levels)
        top = self.preperiod + self.period
        if len(levels) != top + 1:
            raise StructuralError(f"expected {top + 1} stored levels, got {len(levels)}")
        if len(functors) != top:
            raise StructuralError(f"expected {top} stored functors, got {len(functors)}")
        if not levels[top].same_simples(levels[self.preperiod]):
            raise StructuralError(
                f"periodic tail: level {top} simples {levels[top].labels} differ from "
                f"level {self.preperiod} simples {levels[self.preperiod].labels}"
            )
        self.levels = tuple(levels)
        fs = []
        for k, f in enumerate(functors, start=1):
            adj = f.adjacency if isinstance(f, GraphFunctor) else np.asarray(f)
            fs.append(GraphFunctor(levels[k - 1], levels[k], adj, name=f"G{k}"))
        self.functors = tuple(fs)
        self._levels_cache = {}

    # -- presentation ------------------------------------------------------

    @property
    def stored_depth(self):
        return self.preperiod + self.period

    def canonical(self, k):
        """Stored level carrying the functor ``Gamma_k`` and the shape of level ``k``."""
        L, K = self.preperiod, self.period
        if k < 0:
            raise ValueError("levels are nonnegative")
        if k <= L:
            return k
        return L + (k - L - 1) % K + 1

    def scale_exponent(self, k):
        L, K = self.preperiod, self.period
        if k <= L:
            return 0
        return (k - L - 1) // K

    def weights(self, k):
        r = self.canonical(k)
        return self.levels[r].weights / self.pf_scalar ** self.scale_exponent(k)

    def level(self, k):
        return materialize_level(self, k)[0]

    def functor(self, k):
        """``Gamma_k`` between materialized levels ``k-1`` and ``k``."""
        if k < 1:
            raise ValueError("functors start at level 1")
        return materialize_level(self, k)[1]

    def adjacency(self, k):
        return self.functors[self.canonical(k) - 1].adjacency

    def same_presentation(self, other):
        return self.preperiod == other.preperiod and self.period == other.period

    def __repr__(self):
        return (f"TracialBratteli({self.name!r}, L={self.preperiod}, K={self.period}, "
                f"d={self.pf_scalar:.6g}, sizes={[c.size for c in self.levels]})")

    # -- builders ----------------------------------------------------------

    @classmethod
    def from_periodic(cls, period_functors, prefix_functors=(), labels=None, name=""):
        """Build a 0-cell whose weights are forced by the Perron-Frobenius data.

        ``prefix_functors`` are ``Gamma_1 .. Gamma_L`` and ``period_functors``
        are ``Gamma_{L+1} .. Gamma_{L+K}`` (adjacency matrices).  The weight
        at level ``L`` is the PF vector of the transposed one-period product.
        """
        pre = [np.asarray(a, dtype=np.int64) for a in prefix_functors]
        per = [np.asarray(a, dtype=np.int64) for a in period_functors]
        if not per:
            raise StructuralError("at least one periodic functor is required")
        allf = pre + per
        sizes = [allf[0].shape[1]] + [a.shape[0] for a in allf]
        for k in range(1, len(allf)):
            if allf[k].shape[1] != allf[k - 1].shape[0]:
                raise StructuralError(f"functor {k + 1} does not compose with functor {k}")
        L, K = len(pre), len(per)
        if sizes[L + K] != sizes[L]:
            raise StructuralError("one period must return to the same number of simples")
        prod = np.eye(sizes[L], dtype=np.int64)
        for a in per:
            prod = a @ prod
        d, mu_L = pf_solve(prod)
        mus = [None] * (L + K + 1)
        mus[L + K] = mu_L / d
        for k in range(L + K, 0, -1):
            mus[k - 1] = allf[k - 1].T @ mus[k]
            if k - 1 == L:
                mus[L] = mu_L
        total = mus[0].sum()
        mus = [m / total for m in mus]
        if labels is None:
            labels = [[f"v{i}" for i in range(s)] for s in sizes]
            labels[L + K] = labels[L]
        levels = [WeightedCategory(labels[k], mus[k]) for k in range(L + K + 1)]
        return cls(levels, allf, preperiod=L, period=K, pf_scalar=d, name=name)

    @classmethod
    def constant(cls, adjacency, labels=None, name=""):
        """Period-one tower with a fixed square graph."""
        adjacency = np.asarray(adjacency, dtype=np.int64)
        lab = None if labels is None else [list(labels), list(labels)]
        return cls.from_periodic([adjacency], labels=lab, name=name)

    @classmethod
    def single_simple(cls, n, label="*", name=""):
        """One simple per level, ``Gamma = [[n]]``, ``mu^k = n^-k``."""
        return cls.from_periodic([[[int(n)]]], labels=[[label], [label]], name=name)

    def reweighted(self, levels):
        return TracialBratteli(levels, [f.adjacency for f in self.functors], self.preperiod,
                               self.period, self.pf_scalar, self.name)


def materialize_level(b, k):
    """``(level k category, Gamma_k)``; ``Gamma_0`` is ``None``."""
    if k < 0:
        raise ValueError("levels are nonnegative")
    if k <= b.stored_depth:
        return b.levels[k], (b.functors[k - 1] if k >= 1 else None)
    hit = b._levels_cache.get(k)
    if hit is None:
        base = b.levels[b.canonical(k)]
        cat = WeightedCategory(base.labels, b.weights(k))
        prev = b.level(k - 1)
        hit = (cat, GraphFunctor(prev, cat, b.adjacency(k), name=f"G{k}"))
        b._levels_cache[k] = hit
    return hit


@dataclass(frozen=True)
class AfLevel:
    """Dimension vector of ``A_k`` and the trace weights ``mu^k``."""

    level: int
    dims: np.ndarray
    trace_weights: np.ndarray

    def trace_of_identity(self):
        return float(self.dims @ self.trace_weights)


def validate_zero_cell(b, tol=None, extra_periods=2):
    """Check normalization, trace condition, bi-faithfulness and the periodic tail.

    Returns a report dictionary; nothing is repaired.
    """
    tol = config.default_tol() if tol is None else tol
    errors = []
    residuals = {}
    s0 = float(b.levels[0].weights.sum())
    norm_res = abs(s0 - 1.0)
    if norm_res > 1e-10:
        errors.append(f"level-0 weights sum to {s0!r}, not 1")
    horizon = b.stored_depth + extra_periods * b.period
    for k in range(1, horizon + 1):
        G = b.functor(k)
        rows, cols = G.bifaithful_defects()
        if rows or cols:
            errors.append(f"Gamma_{k} not bi-faithful: isolated targets {rows}, sources {cols}")
        res = float(np.max(np.abs(G.adjacency.T @ b.weights(k) - b.weights(k - 1))))
        residuals[k] = res
        if res > tol:
            errors.append(f"trace condition fails at level {k}: residual {res:.3e}")
    top, L = b.stored_depth, b.preperiod
    tail = float(np.max(np.abs(b.levels[top].weights - b.levels[L].weights / b.pf_scalar)))
    if tail > tol:
        errors.append(f"periodic tail: mu^{top} differs from mu^{L}/d by {tail:.3e}")
    worst = max(residuals.values(), default=0.0)
    return {
        "ok": not errors,
        "errors": errors,
        "normalization_residual": norm_res,
        "trace_residuals": residuals,
        "tail_residual": tail,
        "worst_residual": max(worst, tail, norm_res),
        "levels_checked": horizon,
    }


def pf_condition_residuals(b):
    """Residuals of ``Gamma_{k+K}...Gamma_{k+1} mu^k = d mu^k`` for ``k = L .. L+K-1``.

    Together with the stored tail this is the PF condition used by the
    periodic flatness theorem.
    """
    out = {}
    for k in range(b.preperiod, b.preperiod + b.period):
        v = b.weights(k)
        w = v.copy()
        for j in range(k + 1, k + b.period + 1):
            w = b.adjacency(j) @ w
        out[k] = float(np.max(np.abs(w - b.pf_scalar * v)) / np.max(np.abs(v)))
    return out


def _strong_classes(adj):
    n, lab = connected_components(np.asarray(adj) > 0, directed=True, connection="strong")
    return n, lab


def pf_solve(adjacency, assume_irreducible=True, tol=config.PF_TOL, max_iter=config.PF_MAX_ITER):
    """Perron-Frobenius pair of ``Gamma' mu = d mu`` by power iteration.

    The iteration runs on ``Gamma' + I`` (same eigenvector, primitive even for
    periodic graphs) from the all-ones vector.  ``mu`` is normalized to sum 1.
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructuralError(f"pf_solve needs a square matrix, got shape {A.shape}")
    if np.any(A < 0):
        raise StructuralError("pf_solve needs a nonnegative matrix")
    if not assume_irreducible:
        raise StructuralError("pf_solve only handles irreducible matrices; set assume_irreducible")
    n_cls, lab = _strong_classes(A)
    if n_cls > 1:
        first = [int(i) for i in np.flatnonzero(lab == lab[0])]
        raise StructuralError(
            f"matrix is reducible: vertex class {first} is not strongly connected "
            f"to the remaining vertices ({n_cls} strong components)"
        )
    n = A.shape[0]
    B = A.T + np.eye(n)
    mu = np.ones(n) / n
    best, stall, res = np.inf, 0, np.inf
    for _ in range(max_iter):
        nxt = B @ mu
        d = nxt.sum() / mu.sum() - 1.0
        nxt /= nxt.sum()
        mu = nxt
        res = np.max(np.abs(A.T @ mu - d * mu)) / max(1.0, d)
        # keep going past the tolerance until rounding stops the improvement
        if res < 0.5 * best:
            best, stall = res, 0
        else:
            stall += 1
        if res < 1e-15 or (best < tol and stall > 20):
            break
    if best >= tol:
        raise ConvergenceError(f"PF power iteration did not converge in {max_iter} steps",
                               trace=[float(res)])
    d = float((A.T @ mu).sum() / mu.sum())
    if not d > 0:
        raise StructuralError("PF eigenvalue is not positive")
    return d, mu


def af_tower(b, upto):
    """Dimension vectors and trace weights of ``A_0 .. A_upto`` with inclusion matrices."""
    if upto < 0:
        raise ValueError("upto must be nonnegative")
    dims = np.ones(b.levels[0].size, dtype=np.int64)
    out = [AfLevel(0, dims, b.weights(0))]
    incl = []
    for k in range(1, upto + 1):
        G = b.adjacency(k)
        dims = G @ dims
        out.append(AfLevel(k, dims, b.weights(k)))
        incl.append(G)
    return out, incl


def trace_compat_residual(b, upto, rng, samples=2, max_dim=400):
    """Embed random ``alpha in A_k`` into ``A_{k+1}`` and compare the two traces."""
    x = base_object(b.level(0))
    worst = 0.0
    for k in range(1, upto + 1):
        G = b.functor(k)
        y = apply_functor(G, x)
        if max(y.dims) > max_dim:
            break
        for _ in range(samples):
            alpha = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in x.dims]
            lo = categorical_trace(x.dims, alpha, b.level(k - 1))
            hi = categorical_trace(y.dims, functor_on_morphism(G, alpha), b.level(k))
            worst = max(worst, abs(lo - hi) / max(1.0, abs(lo)))
        x = y
    return worst
