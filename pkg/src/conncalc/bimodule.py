"""Finite-level path-space oracle for the loop operator and 2-cells.

``H_k = Hom(Y_k, Lambda_k X_k)`` with ``X_k = Gamma_k ... Gamma_1 m_0`` and
``Y_k = Delta_k ... Delta_1 n_0``, where ``m_0`` and ``n_0`` contain every
level-0 simple once.  Elements are stored per target simple ``n`` as dense
matrices and flattened row-major in order of ``n``.  The scalar inner product
is ``<xi, zeta> = sum_n nu^k_n tr(zeta_n* xi_n)``.

Nothing here uses the loop-matrix kernels: the projections are orthogonal
projections computed from the explicit inclusions, so agreement with
:mod:`conncalc.twocell` is an independent check.
"""
from __future__ import annotations

import numpy as np

from . import config
from .errors import StructuralError
from .semisimple import (
    NatTrans,
    apply_functor,
    base_object,
    functor_on_morphism,
    nt_component,
    reorder_morphism,
)
from .twocell import NtSpace, loop_matrix

__all__ = [
    "HSpace",
    "h_space",
    "include_h",
    "inclusion_matrix",
    "transport",
    "phi_action",
    "phi_matrix",
    "projection_p",
    "projection_operator",
    "compression_identity_check",
    "pp_basis",
    "finite_level_two_cell",
    "central_part",
    "oracle_flat_dimension",
    "module_compat_residual",
    "theta_candidate",
]


def _walk_object(b, k):
    cache = b._levels_cache
    key = ("walk", k)
    if key not in cache:
        x = base_object(b.level(0)) if k == 0 else apply_functor(b.functor(k), _walk_object(b, k - 1))
        cache[key] = x
    return cache[key]


class HSpace:
    """``Hom(Y_k, Lambda_k X_k)`` for the 1-cell ``c``."""

    def __init__(self, c, k):
        if k < 0:
            raise ValueError("levels are nonnegative")
        self.cell, self.level = c, k
        self.X = _walk_object(c.source, k)
        self.Y = _walk_object(c.target, k)
        self.LX = apply_functor(c.lam(k), self.X)
        rows, cols = self.LX.dims, self.Y.dims
        self.shapes = [(int(r), int(s)) for r, s in zip(rows, cols)]
        self.offsets = np.concatenate([[0], np.cumsum([r * s for r, s in self.shapes])]).astype(int)
        self.dim = int(self.offsets[-1])
        nu = c.target.weights(k)
        self.gram = np.concatenate([np.full(r * s, nu[n]) for n, (r, s) in enumerate(self.shapes)]) \
            if self.dim else np.zeros(0)

    def unflatten(self, vec):
        return [vec[self.offsets[n]:self.offsets[n + 1]].reshape(shp) for n, shp in enumerate(self.shapes)]

    def flatten(self, blocks):
        for n, (b, shp) in enumerate(zip(blocks, self.shapes)):
            if b.shape != shp:
                raise StructuralError(f"H-space block {n} has shape {b.shape}, expected {shp}")
        if not blocks:
            return np.zeros(0, dtype=complex)
        return np.concatenate([np.asarray(b, dtype=complex).ravel() for b in blocks])

    def inner(self, x, y):
        return complex(np.sum(self.gram * x * np.conj(y)))

    def norm(self, x):
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def random(self, rng):
        return rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)

    def adjoint_of(self, mat, other):
        """Adjoint of ``mat: self -> other`` for the two trace inner products."""
        return (mat.conj().T * other.gram[None, :]) / self.gram[:, None]


def h_space(c, k):
    return HSpace(c, k)


def _w_at_x(c, k, X):
    """``W_{k}`` evaluated at ``X = X_{k-1}`` between the iterated-functor bases."""
    dl, lg = c.path_functors(k)
    comp = nt_component(c.w_nat(k), X)
    dom_from, cod_from = apply_functor(dl, X), apply_functor(lg, X)
    dom_to = apply_functor(c.target.functor(k), apply_functor(c.lam(k - 1), X))
    cod_to = apply_functor(c.lam(k), apply_functor(c.source.functor(k), X))
    return reorder_morphism(comp, dom_from, dom_to, cod_from, cod_to)


def include_h(c, k, xi):
    """``H_k -> H_{k+1}``: whisker by ``Delta_{k+1}`` then apply ``W_{k+1}`` at ``X_k``."""
    hk = HSpace(c, k)
    blocks = hk.unflatten(np.asarray(xi, dtype=complex)) if not isinstance(xi, list) else xi
    D = functor_on_morphism(c.target.functor(k + 1), blocks)
    W = _w_at_x(c, k + 1, hk.X)
    return HSpace(c, k + 1).flatten([w @ d for w, d in zip(W, D)])


def inclusion_matrix(c, k, levels=1):
    """Matrix of ``H_k -> H_{k+levels}``."""
    hk = HSpace(c, k)
    cols = []
    for i in range(hk.dim):
        v = np.zeros(hk.dim, dtype=complex)
        v[i] = 1.0
        for j in range(levels):
            v = include_h(c, k + j, v)
        cols.append(v)
    out_dim = HSpace(c, k + levels).dim
    return np.column_stack(cols) if cols else np.zeros((out_dim, 0), dtype=complex)


def transport(c1, c2, k, gamma):
    """``gamma in Hom(Lambda_k X_k, Omega_k X_k)`` moved to level ``k+1``: ``W^O Delta(gamma) W^L*``."""
    X = _walk_object(c1.source, k)
    D = functor_on_morphism(c1.target.functor(k + 1), gamma)
    WL, WO = _w_at_x(c1, k + 1, X), _w_at_x(c2, k + 1, X)
    return [wo @ d @ wl.conj().T for wo, d, wl in zip(WO, D, WL)]


def _component_at_x(eta, c, k):
    return nt_component(eta, _walk_object(c.source, k))


def phi_matrix(c1, c2, k, gamma, level=None):
    """Matrix of ``Phi_gamma: H^Lambda_level -> H^Omega_level`` for ``gamma`` given at level ``k``."""
    level = k if level is None else level
    if level < k:
        raise ValueError("Phi acts on levels at or above the level of gamma")
    for j in range(k, level):
        gamma = transport(c1, c2, j, gamma)
    hl, ho = HSpace(c1, level), HSpace(c2, level)
    out = np.zeros((ho.dim, hl.dim), dtype=complex)
    for n, g in enumerate(gamma):
        cols = hl.shapes[n][1]
        out[ho.offsets[n]:ho.offsets[n + 1], hl.offsets[n]:hl.offsets[n + 1]] = np.kron(g, np.eye(cols))
    return out


def phi_action(c1, c2, k, gamma, xi, level=None):
    """``Phi_gamma(xi)`` for ``xi`` in ``H^Lambda_level``."""
    return phi_matrix(c1, c2, k, gamma, level) @ np.asarray(xi, dtype=complex)


def projection_operator(c, k, level):
    """Orthogonal projection ``p_k`` on ``H_level`` (onto the image of ``H_k``)."""
    inc = inclusion_matrix(c, k, level - k)
    adj = HSpace(c, k).adjoint_of(inc, HSpace(c, level))
    return inc @ adj


def projection_p(c, k, xi, level):
    """``p_k xi`` expressed as an element of ``H_k``."""
    inc = inclusion_matrix(c, k, level - k)
    return HSpace(c, k).adjoint_of(inc, HSpace(c, level)) @ np.asarray(xi, dtype=complex)


def compression_identity_check(c1, c2, k, eta):
    """``max |q_{k-1} Phi_{eta_X} p_{k-1} - Phi_{(S_k eta)_X} p_{k-1}|`` on a basis of ``H_{k-1}``."""
    if k < 1:
        raise ValueError("the compression identity starts at level 1")
    if not isinstance(eta, NatTrans):
        eta = NtSpace(c1, c2, k).to_nat(eta)
    incL = inclusion_matrix(c1, k - 1)
    incO = inclusion_matrix(c2, k - 1)
    adjO = HSpace(c2, k - 1).adjoint_of(incO, HSpace(c2, k))
    lhs = adjO @ phi_matrix(c1, c2, k, _component_at_x(eta, c1, k)) @ incL
    s_eta = NtSpace(c1, c2, k - 1).to_nat(loop_matrix(c1, c2, k).apply(eta.flatten()))
    rhs = phi_matrix(c1, c2, k - 1, _component_at_x(s_eta, c1, k - 1))
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


def pp_basis(c):
    """Pimsner-Popa basis of ``H_0``: standard columns of ``Hom(n_0, Lambda_0 m_0)``.

    Returns ``(basis, resolution_residual, d_B)``.
    """
    h0 = HSpace(c, 0)
    basis = []
    for n, (r, s) in enumerate(h0.shapes):
        for i in range(r):
            blocks = [np.zeros(shp, dtype=complex) for shp in h0.shapes]
            blocks[n][i, 0] = 1.0
            basis.append(h0.flatten(blocks))
    total = [np.zeros((r, r), dtype=complex) for r, _ in h0.shapes]
    for sig in basis:
        for n, b in enumerate(h0.unflatten(sig)):
            total[n] += b @ b.conj().T
    res = max((float(np.max(np.abs(t - np.eye(t.shape[0])), initial=0.0)) for t in total), default=0.0)
    d_b = float(sum(h0.inner(s, s).real for s in basis))
    return basis, res, d_b


def central_part(c1, c2, k, gamma):
    """Nearest ``eta_{X_k}`` to ``gamma``: average the diagonal copy-blocks of each ``m``.

    Returns ``(eta, defect)`` with ``defect = max |gamma - eta_{X_k}|``.
    """
    X = _walk_object(c1.source, k)
    lam, om = c1.lam(k), c2.lam(k)
    a = X.dims
    blocks = {}
    for n, g in enumerate(gamma):
        r0 = c0 = 0
        for m in range(len(a)):
            dr, dc = om.n(m, n), lam.n(m, n)
            acc = np.zeros((dr, dc), dtype=complex)
            for cp in range(a[m]):
                acc += g[r0 + cp * dr:r0 + (cp + 1) * dr, c0 + cp * dc:c0 + (cp + 1) * dc]
            blocks[(m, n)] = acc / a[m] if a[m] else acc
            r0 += a[m] * dr
            c0 += a[m] * dc
    eta = NatTrans(lam, om, blocks)
    back = nt_component(eta, X)
    defect = max((float(np.max(np.abs(x - y), initial=0.0)) for x, y in zip(gamma, back)), default=0.0)
    return eta, defect


def finite_level_two_cell(c1, c2, k, eta=None, operator=None):
    """Round trip ``NT -> operator on H_k -> NT`` through the PP-basis reconstruction.

    Give either ``eta`` (a natural transformation at level ``k``) or an
    ``operator`` from ``H^Lambda_k`` to ``H^Omega_k``.  The reconstructed
    ``gamma = sum_sigma T(i sigma) (i sigma)*`` is projected onto the central
    elements; the report carries the non-central defect and, when ``eta`` was
    given, the round-trip residual.
    """
    hl, ho = HSpace(c1, k), HSpace(c2, k)
    if eta is not None:
        if not isinstance(eta, NatTrans):
            eta = NtSpace(c1, c2, k).to_nat(eta)
        operator = phi_matrix(c1, c2, k, _component_at_x(eta, c1, k))
    if operator is None:
        raise ValueError("give eta or operator")
    basis, _, _ = pp_basis(c1)
    inc = inclusion_matrix(c1, 0, k)
    gamma = [np.zeros((ho.shapes[n][0], hl.shapes[n][0]), dtype=complex) for n in range(len(hl.shapes))]
    for sig in basis:
        s = inc @ sig
        ts = ho.unflatten(operator @ s)
        for n, sb in enumerate(hl.unflatten(s)):
            gamma[n] += ts[n] @ sb.conj().T
    rec, defect = central_part(c1, c2, k, gamma)
    report = {"operator": operator, "gamma": gamma, "eta": rec, "defect": defect}
    if eta is not None:
        report["residual"] = (rec - eta).max_abs()
    return report


def oracle_flat_dimension(c1, c2, k0, depth, tol=1e-8):
    """Dimension of ``{eta in NT(Lambda_k0, Omega_k0)}`` whose transports stay central.

    Returns ``(dims, saturation)``: ``dims[j-1]`` is the dimension when
    centrality is imposed on levels ``k0+1 .. k0+j``, and ``saturation`` is
    the first ``j`` after which the dimension no longer changes within
    ``depth``.
    """
    sp = NtSpace(c1, c2, k0)
    images = [[] for _ in range(depth)]
    for i in range(sp.dim):
        gamma = _component_at_x(sp.to_nat(sp.basis_vector(i)), c1, k0)
        for j in range(depth):
            gamma = transport(c1, c2, k0 + j, gamma)
            eta, _ = central_part(c1, c2, k0 + j + 1, gamma)
            back = nt_component(eta, _walk_object(c1.source, k0 + j + 1))
            images[j].append(np.concatenate([(g - b).ravel() for g, b in zip(gamma, back)]))
    dims = []
    stacked = np.zeros((0, sp.dim), dtype=complex)
    for j in range(depth):
        block = np.column_stack(images[j]) if sp.dim else np.zeros((0, 0))
        stacked = np.vstack([stacked, block]) if stacked.size or block.size else stacked
        if stacked.shape[0] == 0:
            dims.append(sp.dim)
            continue
        s = np.linalg.svd(stacked, compute_uv=False)
        rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
        dims.append(sp.dim - rank)
    sat = depth
    while sat > 1 and dims[sat - 2] == dims[-1]:
        sat -= 1
    return dims, sat


def module_compat_residual(c, k, rng):
    """``i(Lambda(a) xi b) = Lambda(Gamma(a)) i(xi) Delta(b)`` on random ``a, xi, b``."""
    hk = HSpace(c, k)
    xi = hk.unflatten(hk.random(rng))
    a = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for d in hk.X.dims]
    b = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for d in hk.Y.dims]
    La = functor_on_morphism(c.lam(k), a)
    left = include_h(c, k, [la @ x @ bb for la, x, bb in zip(La, xi, b)])
    Ga = functor_on_morphism(c.lam(k + 1), functor_on_morphism(c.source.functor(k + 1), a))
    Db = functor_on_morphism(c.target.functor(k + 1), b)
    ix = HSpace(c, k + 1).unflatten(include_h(c, k, xi))
    right = HSpace(c, k + 1).flatten([g @ x @ d for g, x, d in zip(Ga, ix, Db)])
    return float(np.max(np.abs(left - right), initial=0.0))


def theta_candidate(c, k):
    """``theta^k_m = mu^k_m / (Lambda_k' nu^k)_m`` and the operator ``Phi_{Lambda_k(theta^k)}`` on ``H_k``."""
    mu, nu = c.source.weights(k), c.target.weights(k)
    theta = mu / (c.lam_adj(k).T @ nu)
    lam = c.lam(k)
    eta = NatTrans(lam, lam, {(m, n): theta[m] * np.eye(lam.n(m, n))
                              for m in range(lam.source.size) for n in range(lam.target.size)})
    return theta, phi_matrix(c, c, k, _component_at_x(eta, c, k))
