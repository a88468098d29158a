# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled loop-matrix contraction (same contract as ``_fallback.loop_matrix_kernel``)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def loop_matrix_kernel(double complex[::1] wl, double complex[::1] wo,
                       long long[:, ::1] terms, double[::1] kappa,
                       double complex[:, ::1] out):
    cdef Py_ssize_t t, g, d, i, j, w, l
    cdef long long wlo, wln, woo, won, rl, ro, cl, co, ng, nd, di, dj, dw, dl, orow, ocol
    cdef double kap
    cdef double complex acc, a
    cdef Py_ssize_t nterms = terms.shape[0]
    for t in range(nterms):
        wlo = terms[t, 0]; wln = terms[t, 1]; woo = terms[t, 2]; won = terms[t, 3]
        rl = terms[t, 4]; ro = terms[t, 5]; cl = terms[t, 6]; co = terms[t, 7]
        ng = terms[t, 8]; nd = terms[t, 9]; di = terms[t, 10]; dj = terms[t, 11]
        dw = terms[t, 12]; dl = terms[t, 13]; orow = terms[t, 14]; ocol = terms[t, 15]
        kap = kappa[t]
        for w in range(dw):
            for l in range(dl):
                for i in range(di):
                    for j in range(dj):
                        acc = 0
                        for g in range(ng):
                            for d in range(nd):
                                a = wo[woo + (ro + g * di + i) * won + co + w * nd + d]
                                acc = acc + a.conjugate() * \
                                    wl[wlo + (rl + g * dj + j) * wln + cl + l * nd + d]
                        out[orow + w * dl + l, ocol + i * dj + j] += kap * acc
    return np.asarray(out)
