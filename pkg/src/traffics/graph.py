"""*-test graphs, *-graph monomials and their algebra.

A graph is a vertex count plus a sorted tuple of edges ``(src, dst, var,
star)``. An edge labeled ``(x, star=True)`` stands for the adjoint ``x*``.
Monomials add an input and an output vertex; n-graph monomials add an
ordered tuple of roots.

Canonical forms are computed by colour refinement followed by an exhaustive
individualization search, so two graphs get equal bytes exactly when they are
isomorphic with labels, orientation, multiplicity and roots preserved.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ContractError
from .partitions import SetPartition


class EdgeLabel(NamedTuple):
    variable: str
    star: bool = False

    def adjoint(self) -> "EdgeLabel":
        return EdgeLabel(self.variable, not self.star)

    def __str__(self) -> str:
        return self.variable + ("*" if self.star else "")


class Edge(NamedTuple):
    src: int
    dst: int
    var: str
    star: bool = False

    @property
    def label(self) -> EdgeLabel:
        return EdgeLabel(self.var, self.star)

    @property
    def is_loop(self) -> bool:
        return self.src == self.dst


def _make_edge(e) -> Edge:
    if isinstance(e, Edge):
        return e
    if len(e) == 3:
        s, d, lab = e
        if isinstance(lab, str):
            lab = EdgeLabel(lab, False)
        return Edge(int(s), int(d), str(lab[0]), bool(lab[1]))
    s, d, var, star = e
    return Edge(int(s), int(d), str(var), bool(star))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def relabel(self) -> list[int]:
        """Map each element to a dense class index ordered by smallest member."""
        ids: dict[int, int] = {}
        out = []
        for a in range(len(self.parent)):
            r = self.find(a)
            if r not in ids:
                ids[r] = len(ids)
            out.append(ids[r])
        return out


@dataclass(frozen=True)
class StarGraph:
    """Finite directed multigraph with (variable, star) edge labels.

    Connectivity is not required; see ``StarTestGraph`` for the connected
    variant used as test functions.
    """

    vertex_count: int
    edges: tuple

    def __init__(self, vertex_count: int, edges: Iterable = ()):
        es = tuple(sorted(_make_edge(e) for e in edges))
        if vertex_count < 0:
            raise ContractError("vertex_count must be nonnegative")
        for e in es:
            if not (0 <= e.src < vertex_count and 0 <= e.dst < vertex_count):
                raise ContractError(f"edge {e} refers to a vertex outside range({vertex_count})")
            if not e.var:
                raise ContractError("edge variable must be nonempty")
        object.__setattr__(self, "vertex_count", int(vertex_count))
        object.__setattr__(self, "edges", es)
        self._check()

    def _check(self) -> None:
        pass

    @property
    def variables(self) -> tuple:
        return tuple(sorted({e.var for e in self.edges}))

    def components(self) -> list[list[int]]:
        uf = _UnionFind(self.vertex_count)
        for e in self.edges:
            uf.union(e.src, e.dst)
        groups: dict[int, list[int]] = defaultdict(list)
        for v in range(self.vertex_count):
            groups[uf.find(v)].append(v)
        return sorted(groups.values())

    def is_connected(self) -> bool:
        return self.vertex_count >= 1 and len(self.components()) == 1

    def induced(self, vertices: Sequence[int], edges: Iterable[Edge] | None = None) -> "StarTestGraph":
        """Subgraph on ``vertices`` (relabeled in the given order)."""
        index = {v: i for i, v in enumerate(vertices)}
        chosen = edges if edges is not None else self.edges
        return StarTestGraph(
            len(vertices),
            [Edge(index[e.src], index[e.dst], e.var, e.star) for e in chosen if e.src in index and e.dst in index],
        )

    def connected_components(self) -> list["StarTestGraph"]:
        return [self.induced(c) for c in self.components()]

    def relabel(self, perm: Sequence[int]) -> "StarGraph":
        """Send vertex ``v`` to ``perm[v]``."""
        return type(self)(self.vertex_count, [Edge(perm[e.src], perm[e.dst], e.var, e.star) for e in self.edges])

    def __str__(self) -> str:
        return to_dsl(self)


class StarTestGraph(StarGraph):
    """Connected ``StarGraph`` with at least one vertex."""

    def _check(self) -> None:
        if not self.is_connected():
            raise ContractError("a *-test graph must be connected with at least one vertex")


@dataclass(frozen=True)
class GraphMonomial:
    graph: StarTestGraph
    input: int
    output: int

    def __post_init__(self):
        n = self.graph.vertex_count
        if not (0 <= self.input < n and 0 <= self.output < n):
            raise ContractError("input/output must be vertices of the graph")

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def edges(self) -> tuple:
        return self.graph.edges

    def __str__(self) -> str:
        return to_dsl(self)


@dataclass(frozen=True)
class NGraphMonomial:
    graph: StarTestGraph
    roots: tuple

    def __init__(self, graph: StarTestGraph, roots: Sequence[int]):
        roots = tuple(int(r) for r in roots)
        if not roots:
            raise ContractError("an n-graph monomial needs at least one root")
        if any(not 0 <= r < graph.vertex_count for r in roots):
            raise ContractError("roots must be vertices of the graph")
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "roots", roots)

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def edges(self) -> tuple:
        return self.graph.edges

    def __str__(self) -> str:
        return to_dsl(self)


# ---------------------------------------------------------------- canonical


@dataclass(frozen=True)
class CanonicalForm:
    bytes: bytes
    relabeling: tuple  # relabeling[v] = canonical index of vertex v

    def __hash__(self):
        return hash(self.bytes)

    def __eq__(self, other):
        return isinstance(other, CanonicalForm) and self.bytes == other.bytes


def _parts(g) -> tuple[str, StarGraph, tuple]:
    if isinstance(g, GraphMonomial):
        return "mono", g.graph, (g.input, g.output)
    if isinstance(g, NGraphMonomial):
        return "ngraph", g.graph, g.roots
    if isinstance(g, StarGraph):
        return "graph", g, ()
    raise TypeError(f"cannot canonicalize {type(g).__name__}")


def _rank(sigs: list) -> list[int]:
    order = {s: i for i, s in enumerate(sorted(set(sigs)))}
    return [order[s] for s in sigs]


def _refine(colors: list[int], out_adj, in_adj) -> list[int]:
    n = len(colors)
    while True:
        sigs = [
            (
                colors[v],
                tuple(sorted((lab, colors[w]) for lab, w in out_adj[v])),
                tuple(sorted((lab, colors[w]) for lab, w in in_adj[v])),
            )
            for v in range(n)
        ]
        new = _rank(sigs)
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def _serialize(kind: str, n: int, edges: tuple, roots: tuple, perm: Sequence[int]) -> tuple:
    mapped = tuple(sorted((perm[e.src], perm[e.dst], e.var, e.star) for e in edges))
    return (kind, n, mapped, tuple(perm[r] for r in roots))


@lru_cache(maxsize=200_000)
def _canonical(kind: str, n: int, edges: tuple, roots: tuple) -> tuple[tuple, tuple]:
    out_adj: list[list] = [[] for _ in range(n)]
    in_adj: list[list] = [[] for _ in range(n)]
    for e in edges:
        lab = (e.var, e.star)
        out_adj[e.src].append((lab, e.dst))
        in_adj[e.dst].append((lab, e.src))
    root_marks = [tuple(i for i, r in enumerate(roots) if r == v) for v in range(n)]
    colors = _rank([(root_marks[v], len(out_adj[v]), len(in_adj[v])) for v in range(n)])
    colors = _refine(colors, out_adj, in_adj)

    best = None
    best_perm = None
    stack = [colors]
    while stack:
        col = stack.pop()
        counts = Counter(col)
        target = next((c for c in sorted(counts) if counts[c] > 1), None)
        if target is None:
            key = _serialize(kind, n, edges, roots, col)
            if best is None or key < best:
                best, best_perm = key, tuple(col)
            continue
        seen_twins = set()
        for v in range(n):
            if col[v] != target:
                continue
            # Swapping two vertices with identical neighbourhoods is an
            # automorphism, so one representative per twin class suffices.
            twin = (tuple(sorted(out_adj[v])), tuple(sorted(in_adj[v])))
            if v not in (w for _, w in out_adj[v]):
                if twin in seen_twins:
                    continue
                seen_twins.add(twin)
            # Individualize v: it goes first within its cell.
            split = [2 * c + (1 if (c == target and u != v) else 0) for u, c in enumerate(col)]
            stack.append(_refine(_rank(split), out_adj, in_adj))
    return best, best_perm


def canonicalize(g) -> CanonicalForm:
    """Isomorphism-invariant key of a graph, monomial or n-graph monomial."""
    kind, graph, roots = _parts(g)
    key, perm = _canonical(kind, graph.vertex_count, graph.edges, roots)
    data = json.dumps([key[0], key[1], [list(e) for e in key[2]], list(key[3])], separators=(",", ":"))
    return CanonicalForm(data.encode(), perm)


def canonical_graph(g):
    """The representative of ``g`` relabeled by its canonical permutation."""
    kind, graph, roots = _parts(g)
    _, perm = _canonical(kind, graph.vertex_count, graph.edges, roots)
    if kind == "graph":
        return graph.relabel(perm)
    new = StarTestGraph(graph.vertex_count, [Edge(perm[e.src], perm[e.dst], e.var, e.star) for e in graph.edges])
    if kind == "mono":
        return GraphMonomial(new, perm[g.input], perm[g.output])
    return NGraphMonomial(new, [perm[r] for r in roots])


def is_isomorphic(a, b) -> bool:
    return canonicalize(a) == canonicalize(b)


# ---------------------------------------------------------------- monomials


def _glue(n: int, edges: Iterable[Edge], pairs: Iterable[tuple[int, int]]):
    """Identify vertex pairs; return (new vertex count, edges, old->new map)."""
    uf = _UnionFind(n)
    for a, b in pairs:
        uf.union(a, b)
    m = uf.relabel()
    new_edges = [Edge(m[e.src], m[e.dst], e.var, e.star) for e in edges]
    return max(m) + 1 if m else 0, new_edges, m


def _shift(edges: Iterable[Edge], k: int) -> list[Edge]:
    return [Edge(e.src + k, e.dst + k, e.var, e.star) for e in edges]


def unit() -> GraphMonomial:
    return GraphMonomial(StarTestGraph(1, ()), 0, 0)


def single_edge(var: str, star: bool = False) -> GraphMonomial:
    return GraphMonomial(StarTestGraph(2, [Edge(0, 1, var, star)]), 0, 1)


def multiply(t1: GraphMonomial, t2: GraphMonomial) -> GraphMonomial:
    """Glue out of ``t1`` to in of ``t2``."""
    k = t1.vertex_count
    n, edges, m = _glue(k + t2.vertex_count, list(t1.edges) + _shift(t2.edges, k), [(t1.output, t2.input + k)])
    return GraphMonomial(StarTestGraph(n, edges), m[t1.input], m[t2.output + k])


def product(ts: Iterable[GraphMonomial]) -> GraphMonomial:
    out = unit()
    for t in ts:
        out = multiply(out, t)
    return out


def _adjoint_edges(edges: Iterable[Edge]) -> list[Edge]:
    return [Edge(e.dst, e.src, e.var, not e.star) for e in edges]


def adjoint(t: GraphMonomial) -> GraphMonomial:
    """Reverse every edge, toggle every star and swap input with output."""
    return GraphMonomial(StarTestGraph(t.vertex_count, _adjoint_edges(t.edges)), t.output, t.input)


def adjoint_n(t: NGraphMonomial) -> NGraphMonomial:
    """Adjoint of an n-graph monomial: edges reversed and stars toggled, roots kept."""
    return NGraphMonomial(StarTestGraph(t.vertex_count, _adjoint_edges(t.edges)), t.roots)


Word = Sequence[tuple[str, bool]]


def from_word(word: Word) -> GraphMonomial:
    """Path monomial reading the word left to right."""
    letters = [(v, bool(s)) for v, s in word]
    L = len(letters)
    return GraphMonomial(StarTestGraph(L + 1, [Edge(i, i + 1, v, s) for i, (v, s) in enumerate(letters)]), 0, L)


def parse_word(text: str) -> list[tuple[str, bool]]:
    """Parse ``"xx*y"`` (single-letter variables) or ``"x,x*,foo"``."""
    text = text.strip()
    tokens = [t.strip() for t in text.split(",")] if "," in text else None
    if tokens is None:
        tokens = []
        for ch in text.replace(" ", ""):
            if ch == "*":
                if not tokens:
                    raise ContractError("word cannot start with '*'")
                tokens[-1] += "*"
            else:
                tokens.append(ch)
    out = []
    for tok in tokens:
        star = tok.endswith("*")
        var = tok[:-1] if star else tok
        if not var or not (var[0].isalpha() or var[0] == "_") or not all(c.isalnum() or c == "_" for c in var):
            raise ContractError(f"bad letter {tok!r} in word")
        out.append((var, star))
    return out


def substitute(t: GraphMonomial, assignment: Mapping[str, GraphMonomial]) -> GraphMonomial:
    """Replace each edge labeled ``x`` by a copy of ``assignment[x]`` (adjoint for ``x*``)."""
    missing = sorted({e.var for e in t.edges} - set(assignment))
    if missing:
        raise ContractError(f"no assignment for variable(s) {', '.join(missing)}")
    n = t.vertex_count
    edges: list[Edge] = []
    pairs: list[tuple[int, int]] = []
    for e in t.edges:
        piece = assignment[e.var]
        if e.star:
            piece = adjoint(piece)
        k = n
        n += piece.vertex_count
        edges.extend(_shift(piece.edges, k))
        pairs += [(e.src, piece.input + k), (e.dst, piece.output + k)]
    total, new_edges, m = _glue(n, edges, pairs)
    return GraphMonomial(StarTestGraph(total, new_edges), m[t.input], m[t.output])


def hadamard(ts: Sequence[GraphMonomial]) -> GraphMonomial:
    """Glue all inputs together and all outputs together."""
    ts = list(ts)
    if not ts:
        raise ContractError("hadamard needs at least one monomial")
    n = 0
    edges: list[Edge] = []
    ins, outs = [], []
    for t in ts:
        edges.extend(_shift(t.edges, n))
        ins.append(t.input + n)
        outs.append(t.output + n)
        n += t.vertex_count
    pairs = [(ins[0], i) for i in ins[1:]] + [(outs[0], o) for o in outs[1:]]
    total, new_edges, m = _glue(n, edges, pairs)
    return GraphMonomial(StarTestGraph(total, new_edges), m[ins[0]], m[outs[0]])


def delta(t: GraphMonomial) -> GraphMonomial:
    """Projection on the diagonal: glue input to output."""
    n, edges, m = _glue(t.vertex_count, t.edges, [(t.input, t.output)])
    return GraphMonomial(StarTestGraph(n, edges), m[t.input], m[t.input])


def transpose(t: GraphMonomial) -> GraphMonomial:
    """Swap input and output, leaving edges untouched."""
    return GraphMonomial(t.graph, t.output, t.input)


def degree_op(t: GraphMonomial) -> GraphMonomial:
    """Keep the graph and make the input also the output."""
    return GraphMonomial(t.graph, t.input, t.input)


def close(t: GraphMonomial) -> StarTestGraph:
    n, edges, _ = _glue(t.vertex_count, t.edges, [(t.input, t.output)])
    return StarTestGraph(n, edges)


def merge(t1: NGraphMonomial, t2: NGraphMonomial) -> StarTestGraph:
    """Test graph obtained by identifying the i-th root of ``t1`` with the i-th root of ``t2``."""
    if len(t1.roots) != len(t2.roots):
        raise ContractError("merge needs the same number of roots")
    k = t1.vertex_count
    pairs = list(zip(t1.roots, (r + k for r in t2.roots)))
    n, edges, _ = _glue(k + t2.vertex_count, list(t1.edges) + _shift(t2.edges, k), pairs)
    return StarTestGraph(n, edges)


def quotient(T: StarGraph, p: SetPartition) -> StarTestGraph:
    """Merge the vertices in each block of ``p``; every edge is kept."""
    if p.n != T.vertex_count:
        raise ContractError(f"partition of {p.n} elements does not cover {T.vertex_count} vertices")
    m = p.block_of()
    cls = StarTestGraph if isinstance(T, StarTestGraph) else StarGraph
    return cls(len(p), [Edge(m[e.src], m[e.dst], e.var, e.star) for e in T.edges])


def reverse_stars(T: StarGraph) -> StarGraph:
    """Rewrite each starred edge as a plain edge in the opposite direction.

    Exact for real matrices, where ``A^*[v, w] = A[w, v]``.
    """
    return type(T)(T.vertex_count, [Edge(e.dst, e.src, e.var, False) if e.star else e for e in T.edges])


def unstar(T: StarGraph) -> StarGraph:
    """Drop every star flag, keeping orientation: exact for Hermitian matrices."""
    return type(T)(T.vertex_count, [Edge(e.src, e.dst, e.var, False) for e in T.edges])


def rename(T: StarGraph, mapping: Mapping[str, str]) -> StarGraph:
    return type(T)(T.vertex_count, [Edge(e.src, e.dst, mapping.get(e.var, e.var), e.star) for e in T.edges])


# ---------------------------------------------------------------- structure


@dataclass(frozen=True)
class ColoredComponent:
    family: object
    vertices: tuple
    edges: tuple

    def graph(self) -> StarTestGraph:
        index = {v: i for i, v in enumerate(self.vertices)}
        return StarTestGraph(len(self.vertices), [Edge(index[e.src], index[e.dst], e.var, e.star) for e in self.edges])


@dataclass(frozen=True)
class ComponentTree:
    components: tuple
    shared_vertices: tuple
    nodes: int
    incidences: tuple  # (component index, shared vertex)
    is_tree: bool


def colored_component_tree(T: StarGraph, family_of: Mapping[str, object]) -> ComponentTree:
    """Components of single-family edges, shared vertices, and the incidence graph between them."""
    missing = sorted({e.var for e in T.edges} - set(family_of))
    if missing:
        raise ContractError(f"no family for variable(s) {', '.join(missing)}")
    by_family: dict[object, list[Edge]] = defaultdict(list)
    for e in T.edges:
        by_family[family_of[e.var]].append(e)
    comps: list[ColoredComponent] = []
    for fam in sorted(by_family, key=repr):
        es = by_family[fam]
        uf = _UnionFind(T.vertex_count)
        for e in es:
            uf.union(e.src, e.dst)
        groups: dict[int, list[Edge]] = defaultdict(list)
        for e in es:
            groups[uf.find(e.src)].append(e)
        for root in sorted(groups):
            vs = tuple(sorted({v for e in groups[root] for v in (e.src, e.dst)}))
            comps.append(ColoredComponent(fam, vs, tuple(groups[root])))
    member = Counter(v for c in comps for v in c.vertices)
    shared = tuple(sorted(v for v, k in member.items() if k >= 2))
    shared_set = set(shared)
    inc = tuple((i, v) for i, c in enumerate(comps) for v in c.vertices if v in shared_set)
    nodes = len(comps) + len(shared)
    if nodes == 0:
        is_tree = T.vertex_count == 1
    else:
        uf = _UnionFind(nodes)
        for i, v in inc:
            uf.union(i, len(comps) + shared.index(v))
        connected = len({uf.find(a) for a in range(nodes)}) == 1
        # Vertices outside every component are isolated, which breaks connectivity.
        covered = len(member) == T.vertex_count
        is_tree = connected and covered and nodes == len(inc) + 1
    return ComponentTree(tuple(comps), shared, nodes, inc, is_tree)


@dataclass(frozen=True)
class GraphFlags:
    is_tree: bool
    is_double_tree: bool
    is_double_tree_opposite: bool
    is_double_tree_opposite_adjoint: bool
    is_directed_line: bool
    is_cyclic: bool


def is_tree(T: StarGraph) -> bool:
    return T.is_connected() and T.vertex_count == len(T.edges) + 1


def _pair_groups(T: StarGraph) -> dict[tuple[int, int], list[Edge]]:
    groups: dict[tuple[int, int], list[Edge]] = defaultdict(list)
    for e in T.edges:
        groups[(min(e.src, e.dst), max(e.src, e.dst))].append(e)
    return groups


def _double_tree_twins(T: StarGraph):
    """Twin-edge pairs when ``T`` is a double tree, else None."""
    if not T.is_connected():
        return None
    groups = _pair_groups(T)
    if any(a == b for a, b in groups):
        return None
    if any(len(es) != 2 for es in groups.values()):
        return None
    if len(groups) != T.vertex_count - 1:
        return None
    return list(groups.values())


def is_directed_line(T: StarGraph) -> bool:
    """After starred edges are reversed and multiplicities collapsed, a directed simple path."""
    R = reverse_stars(T)
    arcs = {(e.src, e.dst) for e in R.edges}
    n = R.vertex_count
    if not R.is_connected() or any(a == b for a, b in arcs) or len(arcs) != n - 1:
        return False
    outdeg = Counter(a for a, _ in arcs)
    indeg = Counter(b for _, b in arcs)
    if any(outdeg[v] > 1 or indeg[v] > 1 for v in range(n)):
        return False
    # n-1 arcs, connected, degrees at most one each way: a directed path unless
    # some pair carries arcs both ways.
    return not any((b, a) in arcs for a, b in arcs)


def is_cyclic(T: StarGraph) -> bool:
    """Directed Eulerian circuit test (edges as drawn)."""
    if not T.is_connected():
        return False
    bal = Counter()
    for e in T.edges:
        bal[e.src] += 1
        bal[e.dst] -= 1
    return all(v == 0 for v in bal.values())


def classify(T: StarGraph) -> GraphFlags:
    twins = _double_tree_twins(T)
    dt = twins is not None
    opp = dt and all(a.src == b.dst and a.dst == b.src for a, b in twins)
    adj = opp and all(a.var == b.var and a.star != b.star for a, b in twins)
    return GraphFlags(
        is_tree=is_tree(T),
        is_double_tree=dt,
        is_double_tree_opposite=opp,
        is_double_tree_opposite_adjoint=adj,
        is_directed_line=is_directed_line(T),
        is_cyclic=is_cyclic(T),
    )


def cycle_graph(word: Word) -> StarTestGraph:
    """Closed word: the cycle test graph of a *-monomial."""
    return close(from_word(word))


def to_dsl(g) -> str:
    kind, graph, roots = _parts(g)
    es = ", ".join(f"{e.src}->{e.dst}:{e.var}{'*' if e.star else ''}" for e in graph.edges)
    parts = [f"v = {graph.vertex_count}", f"e = {es}" if es else None]
    if kind == "mono":
        parts += [f"in = {g.input}", f"out = {g.output}"]
    elif kind == "ngraph":
        parts.append("roots = " + ", ".join(map(str, roots)))
    return "graph { " + "; ".join(p for p in parts if p) + " }"
