"""Compare the compiled loop-matrix kernel with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--seed S]
"""
import argparse
import sys
import timeit

import numpy as np

from conncalc import _kernels
from conncalc.connection import build_random_connection, build_vertex_model, haar_unitary
from conncalc.generate import REGULAR_GRAPHS, identity_lambdas
from conncalc.bratteli import TracialBratteli
from conncalc.twocell import loop_terms


def cases(rng):
    """(label, 1-cell, level): few large blocks first, then many small ones."""
    yield "vertex 3x3", build_vertex_model(haar_unitary(9, rng), 3, 3), 1
    yield "vertex 6x6", build_vertex_model(haar_unitary(36, rng), 6, 6), 1
    for g in (REGULAR_GRAPHS[3][4], REGULAR_GRAPHS[2][4]):
        t = TracialBratteli.constant(g)
        c = build_random_connection(t, t, lambdas=identity_lambdas(t), rng=rng)
        yield f"{len(g)}-vertex graph", c, 1


def _run(kernel, args, shape):
    out = np.zeros(shape, dtype=complex)
    kernel(*args, out)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels.compiled_loop_matrix_kernel is None:
        print("compiled kernel not built; only the fallback is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<20}{'terms':>8}{'compiled ms':>14}{'fallback ms':>14}{'speedup':>10}{'max diff':>12}")
    for label, c, k in cases(rng):
        *kargs, shape = loop_terms(c, c, k)
        fast, slow = _kernels.compiled_loop_matrix_kernel, _kernels.fallback_loop_matrix_kernel
        a, b = _run(fast, kargs, shape), _run(slow, kargs, shape)
        tc = min(timeit.repeat(lambda: _run(fast, kargs, shape), number=1, repeat=args.repeat))
        tf = min(timeit.repeat(lambda: _run(slow, kargs, shape), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(a - b)))
        print(f"{label:<20}{len(kargs[2]):>8}{tc * 1e3:>14.2f}{tf * 1e3:>14.2f}{tf / tc:>10.1f}{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
