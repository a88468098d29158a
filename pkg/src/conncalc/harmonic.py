"""Bounded harmonic sequences, 2-cell spaces and their compositions.

In the periodic case a bounded quasi-flat sequence is determined by its value
at the reference level ``L`` and the one-period loop operator
``S = S_{L+1} ... S_{L+K}``: the sequence ``eta^{(L+nK)}`` is bounded and
``S``-harmonic, hence a combination of ``lambda^-n v`` with ``S v = lambda v``
and ``|lambda| = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import config
from .bratteli import pf_condition_residuals
from .connection import tensor_one_cells
from .errors import ConvergenceError, HypothesisError, SpectralError, StructuralError
from .semisimple import NatTrans, nt_tensor
from .twocell import NtSpace, TwoCellSeq, exchange_residual_vec, loop_matrix, spectral_radius

__all__ = [
    "HarmonicBasis",
    "FlatnessReport",
    "bounded_harmonic_basis",
    "one_period_matrix",
    "check_periodic_hypotheses",
    "periodic_two_cells",
    "is_flat",
    "vertical_compose",
    "horizontal_compose",
    "izumi_fixed_points",
    "identity_two_cell",
    "normalized_gram",
]


@dataclass
class HarmonicBasis:
    """Peripheral eigenpairs of a contraction.

    ``clusters`` maps each distinct phase to ``(R, Lh)``: right eigenvectors
    as columns and left eigenvectors as rows, from which the spectral
    projector is ``R (Lh R)^-1 Lh``.
    """

    phases: list
    vectors: list
    residuals: list
    clusters: dict = field(repr=False)
    gram: np.ndarray = field(repr=False, default=None)
    space: object = field(repr=False, default=None)

    def __len__(self):
        return len(self.phases)

    @property
    def dimension(self):
        return len(self.phases)

    def projector(self, phase):
        """Spectral projector onto the eigenspace of ``phase`` (zero if not peripheral)."""
        n = self._size()
        for lam, (R, Lh) in self.clusters.items():
            if abs(lam - phase) <= config.PERIPHERAL_TOL:
                return R @ np.linalg.solve(Lh @ R, Lh)
        return np.zeros((n, n), dtype=complex)

    def peripheral_projector(self):
        n = self._size()
        P = np.zeros((n, n), dtype=complex)
        for lam in self.clusters:
            P += self.projector(lam)
        return P

    def decompose(self, vec):
        """``[(phase, Q_phase vec)]`` for every peripheral phase, plus the leftover norm."""
        out, rest = [], np.asarray(vec, dtype=complex).copy()
        for lam in sorted(self.clusters, key=_phase_key):
            part = self.projector(lam) @ vec
            out.append((lam, part))
            rest = rest - part
        return out, float(np.max(np.abs(rest), initial=0.0))

    def _size(self):
        if self.vectors:
            return self.vectors[0].shape[0]
        return 0 if self.gram is None else self.gram.shape[0]

    def as_nat(self):
        if self.space is None:
            raise StructuralError("this basis is not attached to a natural-transformation space")
        return [(p, self.space.to_nat(v)) for p, v in zip(self.phases, self.vectors)]


def _phase_key(lam):
    return (float(np.angle(lam)) % (2 * np.pi), abs(lam))


def _null_space(A, tol):
    if A.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    u, s, vh = np.linalg.svd(A)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def _cluster(values, tol):
    groups = []
    for v in sorted(values, key=_phase_key):
        for g in groups:
            if abs(g[0] - v) <= tol:
                g.append(v)
                break
        else:
            groups.append([v])
    out = []
    for g in groups:
        lam = complex(np.mean(g))
        out.append((lam / abs(lam), len(g)))
    return out


def _fix_phase(v):
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) == 0:
        return v
    return v * (abs(v[i]) / v[i])


def bounded_harmonic_basis(X, tol=None, gram=None, peripheral_tol=None, null_tol=1e-7):
    """Peripheral eigenvectors of ``X``; bounded ``X``-harmonic sequences are their span.

    ``x^{(k)} = lambda^-k v`` satisfies ``X x^{(k+1)} = x^{(k)}`` for each
    returned pair.  Vectors within one eigenvalue cluster are orthonormalized
    for the diagonal inner product ``gram`` (the identity when omitted).

    Raises
    ------
    SpectralError
        If the spectral radius exceeds ``1 + tol`` or a peripheral eigenvalue
        carries a Jordan block.
    """
    tol = config.default_tol() if tol is None else tol
    ptol = config.PERIPHERAL_TOL if peripheral_tol is None else peripheral_tol
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    n = X.shape[0]
    if X.shape != (n, n):
        raise StructuralError(f"expected a square matrix, got shape {X.shape}")
    g = np.ones(n) if gram is None else np.asarray(gram, dtype=float)
    if n == 0:
        return HarmonicBasis([], [], [], {}, g)
    T, Z, sdim = sla.schur(X, output="complex", sort=lambda z: abs(z) > 1 - ptol)
    ev = np.diag(T)
    rho = float(np.max(np.abs(ev)))
    if rho > 1 + tol:
        raise SpectralError(f"spectral radius {rho:.12g} exceeds 1 (+{tol:g}); "
                            "bounded harmonic sequences are not governed by the peripheral spectrum")
    phases, vectors, residuals, clusters = [], [], [], {}
    eye = np.eye(n)
    for lam, mult in _cluster(ev[:sdim], ptol):
        A = X - lam * eye
        R = _null_space(A, null_tol)
        R2 = _null_space(A @ A, null_tol)
        if R.shape[1] != mult or R2.shape[1] != mult:
            raise SpectralError(
                f"peripheral eigenvalue {lam:.10g} is defective: algebraic multiplicity {mult}, "
                f"ker(X - l) has dim {R.shape[1]}, ker(X - l)^2 has dim {R2.shape[1]}"
            )
        Lh = _null_space(A.conj().T, null_tol).conj().T
        G = (R.conj().T * g) @ R
        C = np.linalg.cholesky(0.5 * (G + G.conj().T))
        Q = R @ np.linalg.inv(C).conj().T  # g-orthonormal columns
        cols = []
        for j in range(Q.shape[1]):
            v = _fix_phase(Q[:, j])
            cols.append(v)
        clusters[lam] = (np.column_stack(cols), Lh)
        for v in cols:
            res = float(np.max(np.abs(X @ v - lam * v)))
            if res > tol:
                raise SpectralError(f"eigenvector residual {res:.3e} at phase {lam:.10g} exceeds {tol:g}")
            phases.append(lam)
            vectors.append(v)
            residuals.append(res)
    order = sorted(range(len(phases)), key=lambda i: (_phase_key(phases[i])[0], residuals[i]))
    return HarmonicBasis([phases[i] for i in order], [vectors[i] for i in order],
                         [residuals[i] for i in order], clusters, g)


# --------------------------------------------------------------------------
# periodic 2-cells
# --------------------------------------------------------------------------


def normalized_gram(space):
    """Trace inner product on ``space`` scaled so the identity has norm one (endo case)."""
    mu = space.c1.source.weights(space.level)
    nu = space.c1.target.weights(space.level)
    la, oa = space.lam.adjacency, space.om.adjacency
    total = sum(mu[m] * nu[n] * np.sqrt(la[n, m] * oa[n, m]) for (m, n) in space.shapes)
    return space.gram / total if total > 0 else space.gram


def one_period_matrix(c1, c2):
    """``S_{L+1} ... S_{L+K}`` acting on ``NT(Lambda_L, Omega_L)``."""
    L, K = c1.preperiod, c1.period
    S = None
    for j in range(L + 1, L + K + 1):
        m = loop_matrix(c1, c2, j).matrix
        S = m if S is None else S @ m
    return np.array(S)


def check_periodic_hypotheses(c1, c2, tol=None):
    """List the failed hypotheses of the periodic flatness theorem (empty when all hold)."""
    tol = config.default_tol() if tol is None else tol
    failed = []
    if not c1.is_parallel(c2):
        failed.append("the 1-cells are not parallel")
        return failed
    src, tgt = c1.source, c1.target
    if abs(src.pf_scalar - tgt.pf_scalar) > tol * max(src.pf_scalar, tgt.pf_scalar):
        failed.append(f"PF values differ: d={src.pf_scalar:.12g} on the source, "
                      f"{tgt.pf_scalar:.12g} on the target")
    for side, b in (("source", src), ("target", tgt)):
        for k, r in pf_condition_residuals(b).items():
            if r > tol:
                failed.append(f"PF condition fails on the {side} 0-cell at level {k}: "
                              f"one-period product times the weights is off by {r:.3e}")
    return failed


def periodic_two_cells(c1, c2, require_pf=True, tol=None):
    """Basis of the bounded quasi-flat sequences from ``c1`` to ``c2``.

    One sequence per peripheral eigenvector of the one-period loop operator.
    With ``require_pf`` the PF hypotheses are enforced (every returned cell is
    then flat); otherwise they are only reported in ``hypotheses_failed``.
    """
    tol = config.default_tol() if tol is None else tol
    failed = check_periodic_hypotheses(c1, c2, tol)
    if failed and (require_pf or not c1.is_parallel(c2)):
        raise HypothesisError("periodic flatness hypotheses not met: " + "; ".join(failed), failed)
    L, K = c1.preperiod, c1.period
    space = NtSpace(c1, c2, L)
    S = one_period_matrix(c1, c2)
    basis = bounded_harmonic_basis(S, tol=tol, gram=normalized_gram(space))
    basis.space = space
    seqs = []
    for lam, v in zip(basis.phases, basis.vectors):
        seq = TwoCellSeq(c1, c2, [(lam, v)], L, K)
        seq.quasi_flat_residual = seq.quasi_flat_defect(L + 3 * K)
        seqs.append(seq)
    return _TwoCellList(seqs, basis, failed)


class _TwoCellList(list):
    """List of 2-cells carrying the harmonic basis and any waived hypotheses."""

    def __init__(self, seqs, basis, failed):
        super().__init__(seqs)
        self.basis = basis
        self.hypotheses_failed = list(failed)


@dataclass
class FlatnessReport:
    flat: bool
    worst_residual: float
    flat_from: int | None
    residuals: list

    def __iter__(self):
        return iter((self.flat, self.worst_residual, self.flat_from))


def is_flat(seq, horizon=None, threshold=None):
    """Exchange residuals of ``(eta^k, eta^{k+1})`` for ``k < horizon``.

    ``flat_from`` is the earliest level from which every residual in the
    horizon is below ``threshold``; ``worst_residual`` is the largest
    residual from that level on (over the whole horizon when not flat).
    """
    threshold = config.VERDICT_TOL if threshold is None else threshold
    c1, c2 = seq.domain, seq.codomain
    if horizon is None:
        horizon = c1.preperiod + 3 * c1.period
    res = [exchange_residual_vec(c1, c2, k, seq.vec_at(k), seq.vec_at(k + 1)) for k in range(horizon)]
    start = horizon
    while start > 0 and res[start - 1] < threshold:
        start -= 1
    flat = start < horizon or horizon == 0
    flat_from = start if flat else None
    tail = res[start:] if flat else res
    worst = max(tail, default=0.0)
    seq.flat_from = flat_from
    return FlatnessReport(flat, float(worst), flat_from, res)


def izumi_fixed_points(c, tol=None):
    """Fixed points of the one-period Markov operator on ``End(Lambda_L)``."""
    if not c.is_parallel(c):
        raise StructuralError("izumi_fixed_points needs an endomorphism 1-cell")
    cells = periodic_two_cells(c, c, require_pf=False, tol=tol)
    b = cells.basis
    keep = [i for i, p in enumerate(b.phases) if abs(p - 1) <= config.PERIPHERAL_TOL]
    clusters = {lam: v for lam, v in b.clusters.items() if abs(lam - 1) <= config.PERIPHERAL_TOL}
    return HarmonicBasis([b.phases[i] for i in keep], [b.vectors[i] for i in keep],
                         [b.residuals[i] for i in keep], clusters, b.gram, b.space)


def identity_two_cell(c):
    """The identity 2-cell on ``c`` (flat, phase one)."""
    L = c.preperiod
    return TwoCellSeq(c, c, [(1.0, NtSpace(c, c, L).identity_vector())], L, c.period, flat_from=0)


# --------------------------------------------------------------------------
# composition
# --------------------------------------------------------------------------


def _product_terms(a, b, combine):
    """Group ``combine(x, y)`` over pairs of eigen-terms by product phase."""
    groups = {}
    for pa, va in a.terms:
        for pb, vb in b.terms:
            ph = pa * pb
            for key in groups:
                if abs(key - ph) <= config.PERIPHERAL_TOL:
                    groups[key] = groups[key] + combine(va, vb)
                    break
            else:
                groups[ph] = combine(va, vb)
    return list(groups.items())


def _limit(c1, c2, terms, tol, max_iter, check):
    """``lim_n sum_c c^-n S^n y_c`` by iteration, cross-checked by spectral projection.

    An oscillating or slowly converging sequence exhausts ``max_iter`` and
    raises :class:`ConvergenceError`; the spectral value is not substituted.
    """
    S = one_period_matrix(c1, c2)
    space = NtSpace(c1, c2, c1.preperiod)
    if not terms:
        z = np.zeros(space.dim, dtype=complex)
        return z, {"method": "empty", "iterations": 0, "trace": []}
    ys = [y.copy() for _, y in terms]
    phases = [complex(c) for c, _ in terms]
    prev = sum(ys)
    trace = []
    z, method, it = None, None, 0
    for it in range(1, max_iter + 1):
        ys = [(S @ y) / c for y, c in zip(ys, phases)]
        cur = sum(ys)
        diff = float(np.max(np.abs(cur - prev)))
        if it % 100 == 0 or it < 10:
            trace.append(diff)
        if diff < tol:
            z, method = cur, "iteration"
            break
        prev = cur
    report = {"method": method, "iterations": it, "trace": trace}
    basis = None
    try:
        basis = bounded_harmonic_basis(S, gram=normalized_gram(space))
    except SpectralError:
        if z is None:
            raise
    if basis is not None:
        short = sum((basis.projector(c) @ y for c, y in terms), np.zeros(space.dim, dtype=complex))
        report["shortcut"] = short
        if z is not None:
            gap = float(np.max(np.abs(short - z), initial=0.0))
            report["shortcut_gap"] = gap
            if check and gap > 1e-7:
                raise ConvergenceError(
                    f"limit by {method} and the spectral shortcut differ by {gap:.3e}", trace)
    if z is None:
        raise ConvergenceError(
            f"limit did not settle within {max_iter} iterations"
            + (f" (last step {trace[-1]:.3e})" if trace else ""), trace)
    return z, report


def _seq_from_limit(c1, c2, z, report):
    S = one_period_matrix(c1, c2)
    space = NtSpace(c1, c2, c1.preperiod)
    basis = bounded_harmonic_basis(S, gram=normalized_gram(space))
    parts, rest = basis.decompose(z)
    terms = [(p, v) for p, v in parts if np.max(np.abs(v), initial=0.0) > 1e-14]
    seq = TwoCellSeq(c1, c2, terms, c1.preperiod, c1.period)
    report["leftover"] = rest
    seq.limit_report = report
    seq.quasi_flat_residual = rest
    return seq


def _same_cell(a, b):
    if a is b:
        return True
    if not a.is_parallel(b) or any(not np.array_equal(x, y) for x, y in zip(a.lambdas, b.lambdas)):
        return False
    return all(np.allclose(wa[key], wb[key], rtol=0, atol=1e-14)
               for wa, wb in zip(a.w_blocks, b.w_blocks) for key in wa)


def _check_aligned(*seqs):
    L, K = seqs[0].reference_level, seqs[0].period
    for s in seqs:
        if s.reference_level != L or s.period != K:
            raise StructuralError("2-cells use different periodic presentations")


def vertical_compose(xi, eta, tol=None, max_iter=None, check=True):
    """``xi . eta`` for ``eta: Lambda -> Omega`` and ``xi: Omega -> Sigma``.

    The level-``k`` value is ``lim_l S_{k+1} ... S_{k+l}(xi^{(k+l)} eta^{(k+l)})``.
    """
    tol = config.LIMIT_TOL if tol is None else tol
    max_iter = config.LIMIT_MAX_ITER if max_iter is None else max_iter
    if not _same_cell(eta.codomain, xi.domain):
        raise StructuralError("vertical_compose: codomain of eta is not the domain of xi")
    _check_aligned(xi, eta)
    c1, c3 = eta.domain, xi.codomain
    L = eta.reference_level
    s_eta, s_xi, s_out = NtSpace(c1, eta.codomain, L), NtSpace(xi.domain, c3, L), NtSpace(c1, c3, L)

    def combine(x, y):
        out = np.empty(s_out.dim, dtype=complex)
        bx, by = s_xi.blocks(x), s_eta.blocks(y)
        for key in s_out.shapes:
            out[s_out.block_slice(*key)] = (bx[key] @ by[key]).ravel()
        return out

    terms = _product_terms(xi, eta, combine)
    z, report = _limit(c1, c3, terms, tol, max_iter, check)
    return _seq_from_limit(c1, c3, z, report)


def horizontal_compose(kappa, eta, fused_domain=None, fused_codomain=None,
                       tol=None, max_iter=None, check=True):
    """``kappa (x) eta`` on ``Omega1 (x) Lambda1 -> Omega2 (x) Lambda2``.

    ``eta: Lambda1 -> Lambda2`` between cells ``A -> B`` and
    ``kappa: Omega1 -> Omega2`` between cells ``B -> C``.  The fused 1-cells
    are built with :func:`tensor_one_cells` unless supplied.
    """
    tol = config.LIMIT_TOL if tol is None else tol
    max_iter = config.LIMIT_MAX_ITER if max_iter is None else max_iter
    _check_aligned(kappa, eta)
    O1, O2, L1, L2 = kappa.domain, kappa.codomain, eta.domain, eta.codomain
    if not (L1.target is O1.source or L1.target.same_presentation(O1.source)):
        raise StructuralError("horizontal_compose: middle 0-cells do not match")
    F1 = tensor_one_cells(O1, L1) if fused_domain is None else fused_domain
    F2 = tensor_one_cells(O2, L2) if fused_codomain is None else fused_codomain
    L = eta.reference_level
    s_k, s_e = NtSpace(O1, O2, L), NtSpace(L1, L2, L)

    def combine(x, y):
        h = nt_tensor(s_k.to_nat(x), s_e.to_nat(y))
        return NatTrans(F1.lam(L), F2.lam(L), dict(h.blocks)).flatten()

    terms = _product_terms(kappa, eta, combine)
    z, report = _limit(F1, F2, terms, tol, max_iter, check)
    return _seq_from_limit(F1, F2, z, report)
