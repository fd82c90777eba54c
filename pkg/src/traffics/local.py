"""Finite-depth local free product of rooted random networks.

A sampler produces the root component of one network family truncated at a
radius. The product glues the root components of all families at a common
root, then repeatedly hangs fresh components of the other families on every
vertex, until the ball of the requested depth is built.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractError, GuardError, TruncationError
from .evaluation import MatrixFamily
from .graph import StarGraph

DEPTH_GUARD = 4
BALL_GUARD = 200_000


@dataclass
class RootedNetwork:
    """Finite rooted network.

    Attributes
    ----------
    provenance : list of tuple
        For each vertex, the path of ``(family, local id)`` steps from the root.
    edges : dict
        Generator name -> ``{(v, w): weight}``.
    root : int
    depth : int or None
        Radius up to which the network is complete around the root.
    """

    provenance: list
    edges: dict
    root: int = 0
    depth: int | None = None
    family: list = field(default_factory=list)

    @property
    def vertex_count(self) -> int:
        return len(self.provenance)

    def neighbors(self) -> list[set]:
        adj = [set() for _ in range(self.vertex_count)]
        for es in self.edges.values():
            for v, w in es:
                adj[v].add(w)
                adj[w].add(v)
        return adj

    def distances(self, source: int | None = None) -> list:
        source = self.root if source is None else source
        adj = self.neighbors()
        dist = [None] * self.vertex_count
        dist[source] = 0
        q = deque([source])
        while q:
            v = q.popleft()
            for w in adj[v]:
                if dist[w] is None:
                    dist[w] = dist[v] + 1
                    q.append(w)
        return dist

    def ball(self, radius: int) -> "RootedNetwork":
        """Induced network on vertices within ``radius`` of the root."""
        dist = self.distances()
        keep = [v for v in range(self.vertex_count) if dist[v] is not None and dist[v] <= radius]
        index = {v: i for i, v in enumerate(keep)}
        edges = {
            g: {(index[v], index[w]): x for (v, w), x in es.items() if v in index and w in index}
            for g, es in self.edges.items()
        }
        fam = [self.family[v] for v in keep] if self.family else []
        depth = radius if self.depth is None else min(radius, self.depth)
        return RootedNetwork([self.provenance[v] for v in keep], edges, index[self.root], depth, fam)

    def to_matrix_family(self) -> MatrixFamily:
        n = self.vertex_count
        mats = {}
        for g, es in self.edges.items():
            a = np.zeros((n, n), dtype=complex)
            for (v, w), x in es.items():
                a[v, w] += x
            mats[g] = a
        return MatrixFamily(mats, n)

    def to_json(self) -> str:
        return json.dumps(
            {
                "root": self.root,
                "depth": self.depth,
                "vertices": [{"id": i, "provenance": [list(p) for p in prov]} for i, prov in enumerate(self.provenance)],
                "edges": {
                    g: [{"src": v, "dst": w, "re": complex(x).real, "im": complex(x).imag} for (v, w), x in sorted(es.items())]
                    for g, es in sorted(self.edges.items())
                },
            },
            sort_keys=True,
        )

    def canonical_key(self) -> tuple:
        """Provenance-labeled edge sets; equal keys mean identical networks."""
        edges = tuple(
            (g, tuple(sorted((self.provenance[v], self.provenance[w], complex(x)) for (v, w), x in es.items())))
            for g, es in sorted(self.edges.items())
            if es
        )
        return (self.provenance[self.root], tuple(sorted(self.provenance)), edges)


# ------------------------------------------------------------- samplers


@dataclass
class ComponentSampler:
    """Seeded root-component generator.

    ``draw(seed_sequence, radius)`` returns ``(vertex labels, edges, root
    label)`` where labels are hashable local ids, edges map generator name to
    ``{(label, label): weight}``. Draws must be prefix-consistent: a larger
    radius extends a smaller one under the same seed.
    """

    draw: Callable
    generators: tuple
    name: str = ""


def line_sampler(gen: str = "a") -> ComponentSampler:
    """The integers with edges ``k -> k+1`` labeled ``gen``."""

    def draw(ss, radius):
        labels = list(range(-radius, radius + 1))
        return labels, {gen: {(k, k + 1): 1.0 for k in range(-radius, radius)}}, 0

    return ComponentSampler(draw, (gen,), f"line({gen})")


def percolated_line_sampler(gen: str, q: float) -> ComponentSampler:
    """Cluster of 0 in Bernoulli(q) bond percolation on the line.

    Right and left edges draw from separate streams so truncation is
    monotone in the radius.
    """

    def draw(ss, radius):
        right_ss, left_ss = ss.spawn(2)
        right = np.random.Generator(np.random.Philox(right_ss)).random(radius) < q
        left = np.random.Generator(np.random.Philox(left_ss)).random(radius) < q
        hi = 0
        while hi < radius and right[hi]:
            hi += 1
        lo = 0
        while lo < radius and left[lo]:
            lo += 1
        labels = list(range(-lo, hi + 1))
        return labels, {gen: {(k, k + 1): 1.0 for k in range(-lo, hi)}}, 0

    return ComponentSampler(draw, (gen,), f"percolated_line({gen},{q})")


def finite_sampler(vertex_count: int, edges: Mapping[str, Mapping], root: int = 0) -> ComponentSampler:
    """Deterministic finite network; only the root component is kept."""
    gens = tuple(sorted(edges))

    def draw(ss, radius):
        net = RootedNetwork([((0, v),) for v in range(vertex_count)], {g: dict(es) for g, es in edges.items()}, root)
        dist = net.distances()
        keep = [v for v in range(vertex_count) if dist[v] is not None and dist[v] <= radius]
        kept = set(keep)
        es = {g: {(v, w): x for (v, w), x in e.items() if v in kept and w in kept} for g, e in edges.items()}
        return keep, es, root

    return ComponentSampler(draw, gens, "finite")


# ------------------------------------------------------------- product


def _seed_for(seed: int, path: tuple, family: int) -> np.random.SeedSequence:
    digest = hashlib.sha256(repr((path, family)).encode()).digest()
    key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=key)


def estimate_ball_size(degrees: Sequence[float], depth: int) -> float:
    """Rough vertex count of a tree ball with the given per-family degrees."""
    total = sum(degrees)
    size, frontier = 1.0, 1.0
    for d in range(depth):
        frontier *= total if d == 0 else max(total - 1, 1)
        size += frontier
    return size


def local_free_product(samplers: Sequence[ComponentSampler], depth: int, seed: int = 0, guard: int = DEPTH_GUARD) -> RootedNetwork:
    """Ball of radius ``depth`` in the local free product of the samplers."""
    if depth > guard:
        raise GuardError(f"depth {depth} exceeds guard {guard}")
    if depth < 0:
        raise ContractError("depth must be nonnegative")
    gens = [g for s in samplers for g in s.generators]
    if len(set(gens)) != len(gens):
        raise ContractError("samplers must use distinct generator names")
    provenance: list = [()]
    family: list = [None]
    dist: list = [0]
    edges: dict = {g: {} for g in gens}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for j, s in enumerate(samplers):
            if j == family[v]:
                continue
            radius = depth - dist[v]
            if radius <= 0:
                continue
            labels, es, root = s.draw(_seed_for(seed, provenance[v], j), radius)
            local = {}
            for lab in labels:
                if lab == root:
                    local[lab] = v
                    continue
                local[lab] = len(provenance)
                provenance.append(provenance[v] + ((j, lab),))
                family.append(j)
                dist.append(None)
                if len(provenance) > BALL_GUARD:
                    raise GuardError(f"ball exceeds {BALL_GUARD} vertices")
            for g, ge in es.items():
                for (a, b), x in ge.items():
                    edges[g][(local[a], local[b])] = x
            # Distances inside the attached component, shifted by dist[v].
            adj: dict = {lab: set() for lab in labels}
            for ge in es.values():
                for a, b in ge:
                    adj[a].add(b)
                    adj[b].add(a)
            comp_dist = {root: 0}
            bfs = deque([root])
            while bfs:
                a = bfs.popleft()
                for b in adj[a]:
                    if b not in comp_dist:
                        comp_dist[b] = comp_dist[a] + 1
                        bfs.append(b)
            for lab in labels:
                if lab == root or lab not in comp_dist:
                    continue
                u = local[lab]
                dist[u] = dist[v] + comp_dist[lab]
                queue.append(u)
    net = RootedNetwork(provenance, edges, 0, depth, family)
    # Components reached only through other samplers' truncation are kept
    # whole; trim to the exact ball.
    return net.ball(depth)


# ------------------------------------------------------------- counting


def _eccentricity(T: StarGraph, r: int) -> int:
    adj = [set() for _ in range(T.vertex_count)]
    for e in T.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)
    dist = {r: 0}
    q = deque([r])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return max(dist.values())


def rooted_injective_count(T: StarGraph, r: int, net: RootedNetwork):
    """Sum over injective maps sending ``r`` to the root of the edge-weight product.

    Raises
    ------
    TruncationError
        If some vertex of ``T`` lies farther from ``r`` than the network depth.
    """
    if not 0 <= r < T.vertex_count:
        raise ContractError("root is not a vertex of T")
    ecc = _eccentricity(T, r)
    if net.depth is not None and ecc > net.depth:
        raise TruncationError(f"test graph reaches distance {ecc} from its root but the network has depth {net.depth}")
    weights = {g: es for g, es in net.edges.items()}
    adj = net.neighbors()

    def weight(e, a, b):
        es = weights.get(e.var, {})
        if e.star:
            x = es.get((b, a), 0)
            return np.conj(x) if x else 0
        return es.get((a, b), 0)

    # Vertex order: BFS from r so every later vertex has an earlier neighbour.
    order = [r]
    seen = {r}
    tadj = [set() for _ in range(T.vertex_count)]
    for e in T.edges:
        tadj[e.src].add(e.dst)
        tadj[e.dst].add(e.src)
    for v in order:
        for w in sorted(tadj[v]):
            if w not in seen:
                seen.add(w)
                order.append(w)
    pos = {v: i for i, v in enumerate(order)}
    # Edges checked once both endpoints are placed.
    ready: list[list] = [[] for _ in order]
    for e in T.edges:
        ready[max(pos[e.src], pos[e.dst])].append(e)
    anchor = [None] + [next(u for u in tadj[v] if pos[u] < pos[v]) for v in order[1:]]

    phi: dict = {}
    used: set = set()
    total = 0

    def rec(i: int, acc):
        nonlocal total
        if i == len(order):
            total += acc
            return
        v = order[i]
        cands = [net.root] if i == 0 else adj[phi[anchor[i]]]
        for a in cands:
            if a in used:
                continue
            phi[v] = a
            w = acc
            for e in ready[i]:
                w = w * weight(e, phi[e.src], phi[e.dst])
                if w == 0:
                    break
            if w != 0:
                used.add(a)
                rec(i + 1, w)
                used.discard(a)
            del phi[v]

    rec(0, 1)
    return total


@dataclass(frozen=True)
class ConsistencyRow:
    graph: StarGraph
    root: int
    mean: complex
    stderr: float
    std: float
    prediction: object
    agrees: bool


def check_freeprod_consistency(
    samplers: Sequence[ComponentSampler],
    Ts: Sequence[tuple[StarGraph, int]],
    depth: int,
    mc_samples: int,
    seed: int = 0,
) -> list[ConsistencyRow]:
    """Compare rooted counts on the product with the free product of single-family estimates.

    Each family's law is estimated by the mean rooted count on its own
    component (rooted at the canonical vertex 0), and the prediction is the
    free product of those laws. Agreement means ``|mean - prediction| <= 3 std``
    (per-sample spread of the product estimate plus the marginal estimates'
    standard errors), exact when everything is deterministic.
    """
    from .algebra import free_product
    from .laws import TrafficDistribution

    fam = {g: j for j, s in enumerate(samplers) for g in s.generators}
    marg_err: dict = {}

    def marginal(j):
        def rule(C):
            vals = []
            for k in range(mc_samples):
                net = local_free_product([samplers[j]], depth, seed=seed + 7919 * (k + 1))
                vals.append(rooted_injective_count(C, 0, net))
            vals = np.asarray(vals, dtype=complex)
            if mc_samples > 1:
                marg_err[(j, str(C))] = float(np.sqrt(np.sum(np.abs(vals - vals.mean()) ** 2) / (mc_samples - 1) / mc_samples))
            m = vals.mean()
            return float(m.real) if abs(m.imag) < 1e-15 else complex(m)

        return TrafficDistribution(rule, samplers[j].name)

    law = free_product({j: marginal(j) for j in range(len(samplers))}, fam)
    nets = [local_free_product(samplers, depth, seed=seed + k) for k in range(mc_samples)]
    rows = []
    for T, r in Ts:
        vals = np.asarray([rooted_injective_count(T, r, net) for net in nets], dtype=complex)
        mean = complex(vals.mean())
        std = float(np.sqrt(np.sum(np.abs(vals - mean) ** 2) / (len(vals) - 1))) if len(vals) > 1 else 0.0
        pred = law(T)
        band = 3 * (std + sum(marg_err.values()))
        agrees = abs(mean - complex(pred)) <= band + 1e-12
        rows.append(ConsistencyRow(T, r, mean, std / np.sqrt(len(vals)), std, pred, agrees))
    return rows
