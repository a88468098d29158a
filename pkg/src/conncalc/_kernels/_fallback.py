"""Pure numpy implementation of the loop-matrix contraction."""
import numpy as np

# column layout of the ``terms`` table, shared with the compiled kernel
TERM_FIELDS = (
    "wl_off", "wl_dim", "wo_off", "wo_dim",
    "row_l", "row_o", "col_l", "col_o",
    "n_gamma", "n_delta", "d_i", "d_j", "d_w", "d_l",
    "out_row", "out_col",
)


def loop_matrix_kernel(wl, wo, terms, kappa, out):
    """Accumulate every term of the loop matrix into ``out`` (in place).

    For one term, with ``A`` the relevant slice of the codomain connection and
    ``B`` that of the domain connection,

        out[(w, l), (i, j)] += kappa * sum_{g, d} conj(A[(g, i), (w, d)]) B[(g, j), (l, d)]
    """
    for t, kap in zip(terms, kappa):
        (wlo, wln, woo, won, rl, ro, cl, co, ng, nd, di, dj, dw, dl, orow, ocol) = (int(x) for x in t)
        B = wl[wlo:wlo + wln * wln].reshape(wln, wln)[rl:rl + ng * dj, cl:cl + dl * nd]
        A = wo[woo:woo + won * won].reshape(won, won)[ro:ro + ng * di, co:co + dw * nd]
        c = np.einsum("giwd,gjld->wlij", A.reshape(ng, di, dw, nd).conj(), B.reshape(ng, dj, dl, nd))
        out[orow:orow + dw * dl, ocol:ocol + di * dj] += kap * c.reshape(dw * dl, di * dj)
    return out
