"""Shared generators and brute-force oracles for the test suite."""

import itertools
import random

import numpy as np

from traffics.graph import Edge, StarTestGraph


def random_graph(rng: random.Random, max_v=4, max_e=6, variables=("x", "y"), stars=True, loops=True):
    """Random connected *-test graph: a random spanning tree plus extra edges."""
    n = rng.randint(1, max_v)
    edges = []
    for v in range(1, n):
        u = rng.randrange(v)
        a, b = (u, v) if rng.random() < 0.5 else (v, u)
        edges.append(Edge(a, b, rng.choice(variables), stars and rng.random() < 0.3))
    extra = rng.randint(0, max(0, max_e - len(edges)))
    for _ in range(extra):
        a, b = rng.randrange(n), rng.randrange(n)
        if a == b and not loops:
            continue
        edges.append(Edge(a, b, rng.choice(variables), stars and rng.random() < 0.3))
    return StarTestGraph(n, edges)


def random_family(rng: np.random.Generator, N: int, variables=("x", "y")):
    from traffics.evaluation import MatrixFamily

    return MatrixFamily({v: rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)) for v in variables})


def brute_trace(T, F, injective=False):
    """(1/N) sum over all (or injective) vertex maps, by explicit loops."""
    total = 0
    maps = itertools.permutations(range(F.N), T.vertex_count) if injective else itertools.product(range(F.N), repeat=T.vertex_count)
    for phi in maps:
        p = 1
        for e in T.edges:
            p *= F.matrix(e.var, e.star)[phi[e.src], phi[e.dst]]
        total += p
    return total / F.N


def brute_isomorphic(a, b) -> bool:
    """Isomorphism by trying every vertex permutation."""
    from traffics.graph import GraphMonomial, NGraphMonomial

    def parts(g):
        if isinstance(g, GraphMonomial):
            return g.graph, (g.input, g.output), "m"
        if isinstance(g, NGraphMonomial):
            return g.graph, g.roots, "n"
        return g, (), "g"

    ga, ra, ka = parts(a)
    gb, rb, kb = parts(b)
    if ka != kb or ga.vertex_count != gb.vertex_count or len(ga.edges) != len(gb.edges):
        return False
    target = sorted(gb.edges)
    for perm in itertools.permutations(range(ga.vertex_count)):
        if tuple(perm[r] for r in ra) != tuple(rb):
            continue
        if sorted(Edge(perm[e.src], perm[e.dst], e.var, e.star) for e in ga.edges) == target:
            return True
    return False
