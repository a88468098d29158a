"""Seeded random instances: towers, connections and parallel pairs.

Every tower produced here satisfies the PF hypotheses of the periodic
flatness theorem: constant towers use symmetric graphs, and period-two
towers alternate a bipartite graph with its transpose.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .bratteli import TracialBratteli
from .connection import build_random_connection, find_lambda_adjacencies

__all__ = [
    "REGULAR_GRAPHS",
    "random_symmetric_graph",
    "random_tower",
    "random_tower_pair",
    "identity_lambdas",
    "random_connection",
    "random_parallel_pair",
]

# symmetric graphs with constant row sums, grouped by degree
REGULAR_GRAPHS = {
    2: [
        [[2]],
        [[1, 1], [1, 1]],
        [[0, 2], [2, 0]],
        [[1, 1, 0], [1, 0, 1], [0, 1, 1]],
        [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
    ],
    3: [
        [[3]],
        [[1, 2], [2, 1]],
        [[2, 1], [1, 2]],
        [[1, 1, 1], [1, 1, 1], [1, 1, 1]],
        [[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]],
    ],
}


def _connected(adj):
    n, _ = connected_components(np.asarray(adj) > 0, directed=True, connection="strong")
    return n == 1


def random_symmetric_graph(rng, max_simples=4, max_entry=2):
    """Connected symmetric nonnegative integer matrix."""
    while True:
        n = int(rng.integers(1, max_simples + 1))
        a = rng.integers(0, max_entry + 1, size=(n, n))
        a = np.triu(a) + np.triu(a, 1).T
        if a.sum() > 1 and _connected(a):
            return a


def random_tower(rng, max_simples=4):
    """Constant symmetric tower or a period-two bipartite tower."""
    if rng.random() < 0.6:
        return TracialBratteli.constant(random_symmetric_graph(rng, max_simples), name="sym")
    while True:
        p = int(rng.integers(1, max_simples))
        q = int(rng.integers(1, max_simples - p + 1)) if max_simples > p else 1
        G = rng.integers(0, 3, size=(q, p))
        full = np.block([[np.zeros((p, p), int), G.T], [G, np.zeros((q, q), int)]])
        if G.sum() > 1 and _connected(full):
            return TracialBratteli.from_periodic([G, G.T], name="bip")


def random_tower_pair(rng, max_simples=4):
    """Source and target towers with the same PF value."""
    if rng.random() < 0.5:
        t = random_tower(rng, max_simples)
        return t, t
    d = int(rng.choice(sorted(REGULAR_GRAPHS)))
    pool = [g for g in REGULAR_GRAPHS[d] if len(g) <= max_simples]
    a = pool[int(rng.integers(len(pool)))]
    b = pool[int(rng.integers(len(pool)))]
    return TracialBratteli.constant(a, name=f"reg{d}a"), TracialBratteli.constant(b, name=f"reg{d}b")


def identity_lambdas(tower):
    return [np.eye(tower.levels[k].size, dtype=np.int64) for k in range(tower.stored_depth + 1)]


def _lambda_families(source, target, rng, max_mult, limit):
    fams = []
    if source is target:
        fams.append(identity_lambdas(source))
    fams += find_lambda_adjacencies(source, target, max_mult=max_mult, limit=limit, rng=rng, budget=400)
    return fams


def random_connection(rng, max_simples=4, max_mult=3, name="random"):
    """A random valid 1-cell on a random tower pair."""
    while True:
        s, t = random_tower_pair(rng, max_simples)
        fams = _lambda_families(s, t, rng, max_mult, 4)
        if fams:
            fam = fams[int(rng.integers(len(fams)))]
            return build_random_connection(s, t, lambdas=fam, rng=rng, name=name)


def random_parallel_pair(rng, max_simples=4, max_mult=3, same_lambda=None):
    """Two random 1-cells between the same towers (possibly with different ``Lambda``)."""
    while True:
        s, t = random_tower_pair(rng, max_simples)
        fams = _lambda_families(s, t, rng, max_mult, 4)
        if not fams:
            continue
        i = int(rng.integers(len(fams)))
        share = rng.random() < 0.5 if same_lambda is None else same_lambda
        j = i if share else int(rng.integers(len(fams)))
        c1 = build_random_connection(s, t, lambdas=fams[i], rng=rng, name="c1")
        c2 = build_random_connection(s, t, lambdas=fams[j], rng=rng, name="c2")
        return c1, c2
