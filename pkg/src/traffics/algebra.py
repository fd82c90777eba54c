"""Calculus on traffic distributions.

Conversions between traces and injective traces, traffic-free products,
*-moments, the CLT law, transposes, diagonal laws, and a free-cumulant
oracle that shares no code with the graph machinery.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import ContractError, DomainError, GuardError
from .graph import (
    Edge,
    GraphMonomial,
    StarGraph,
    StarTestGraph,
    classify,
    close,
    colored_component_tree,
    from_word,
    hadamard,
    product,
    quotient,
    unstar,
)
from .laws import ONE, ZERO, TrafficDistribution, tau0_semicircular
from .partitions import (
    SetPartition,
    double_factorial,
    enumerate_noncrossing_partitions,
    enumerate_partitions,
    mobius_from_discrete,
)

PARTITION_SUM_GUARD = 10
MOMENT_GUARD = 8
CLT_GUARD = 10


def tau_from_tau0(d: Callable, T: StarGraph, guard: int = PARTITION_SUM_GUARD):
    """Trace from injective trace: sum of ``d`` over all quotients of ``T``.

    When ``d`` carries a ``support`` hint, partitions whose quotient must
    vanish are skipped during enumeration.
    """
    if T.vertex_count > guard:
        raise GuardError(f"{T.vertex_count} vertices exceed the partition-sum guard {guard}")
    support = getattr(d, "support", None)
    if support is not None:
        return _pruned_quotient_sum(d, T, support)
    total = ZERO
    for p in enumerate_partitions(T.vertex_count):
        total = total + d(quotient(T, p))
    return total


def _pruned_quotient_sum(d, T: StarGraph, support):
    n = T.vertex_count
    closing: list[list] = [[] for _ in range(n)]
    for e in T.edges:
        closing[max(e.src, e.dst)].append(e)
    target = support.vertices_for_edges(len(T.edges)) if support.vertices_for_edges else None
    if target is not None and not 1 <= target <= n:
        return ZERO
    exact = support.exact_pair_multiplicity
    max_pairs = len(T.edges) // exact if exact else None
    labels = [0] * n
    mult: Counter = Counter()
    total = ZERO

    def rec(i: int, blocks: int):
        nonlocal total
        if i == n:
            if exact is None or all(c in (0, exact) for c in mult.values()):
                total = total + d(quotient(T, SetPartition.from_rgs(labels)))
            return
        for b in range(blocks + 1):
            nb = blocks + (b == blocks)
            if target is not None and (nb > target or nb + n - i - 1 < target):
                continue
            labels[i] = b
            added = []
            ok = True
            for e in closing[i]:
                u, v = labels[e.src], labels[e.dst]
                if u == v and support.no_loops:
                    ok = False
                    break
                key = (min(u, v), max(u, v))
                mult[key] += 1
                added.append(key)
                if support.max_pair_multiplicity is not None and mult[key] > support.max_pair_multiplicity:
                    ok = False
                    break
            if ok and max_pairs is not None and sum(1 for c in mult.values() if c) > max_pairs:
                ok = False
            if ok:
                rec(i + 1, nb)
            for key in added:
                mult[key] -= 1

    if n == 0:
        return d(T)
    rec(0, 0)
    return total


def tau0_from_tau(tau: Callable, T: StarGraph, guard: int = PARTITION_SUM_GUARD):
    """Injective trace from plain traces of the quotients, by Möbius inversion."""
    if T.vertex_count > guard:
        raise GuardError(f"{T.vertex_count} vertices exceed the partition-sum guard {guard}")
    total = ZERO
    for p in enumerate_partitions(T.vertex_count):
        total = total + mobius_from_discrete(p) * tau(quotient(T, p))
    return total


def trace_law(d: TrafficDistribution) -> Callable[[StarGraph], object]:
    """``T -> tau[T]`` for an injective law ``d``."""
    return lambda T: tau_from_tau0(d, T)


# ------------------------------------------------------------- free product


def free_product(laws: Mapping, fam: Mapping[str, object]) -> TrafficDistribution:
    """Traffic-free product of ``laws[f]`` over families ``f``.

    ``fam`` maps each variable to its family. The value on ``T`` is the
    product of the family laws over the single-family components when the
    component/shared-vertex incidence graph is a tree, and 0 otherwise. A
    disconnected ``T`` is evaluated as the product over its connected
    components.
    """
    laws = dict(laws) if isinstance(laws, Mapping) else dict(enumerate(laws))
    missing = set(fam.values()) - set(laws)
    if missing:
        raise ContractError(f"no law for famil(ies) {sorted(map(str, missing))}")

    def connected_value(T: StarGraph):
        ct = colored_component_tree(T, fam)
        if not ct.is_tree:
            return ZERO
        out = ONE
        for comp in ct.components:
            out = out * laws[comp.family](comp.graph())
            if out == 0:
                return out
        return out

    def rule(T: StarGraph):
        unknown = sorted(set(T.variables) - set(fam))
        if unknown:
            raise ContractError(f"variable(s) {', '.join(unknown)} have no family")
        if T.is_connected():
            return connected_value(T)
        out = ONE
        for C in T.connected_components():
            out = out * connected_value(C)
        return out

    desc = "freeprod(" + ";".join(f"{v}={laws[f].description}" for v, f in sorted(fam.items())) + ")"
    return TrafficDistribution(rule, desc)


def free_product_graph(laws: Mapping, fam: Mapping[str, object]) -> Callable[[StarGraph], object]:
    """Like :func:`free_product` but callable on disconnected graphs without canonicalizing them."""
    d = free_product(laws, fam)
    return d.evaluator


def positional_free_product(laws: Sequence[TrafficDistribution]) -> TrafficDistribution:
    """Free product binding ``laws[k]`` to the k-th variable of each graph in sorted order."""
    products: dict[tuple, TrafficDistribution] = {}

    def rule(T):
        vs = T.variables
        if len(vs) > len(laws):
            raise ContractError(f"graph uses {len(vs)} variables but only {len(laws)} laws are given")
        key = tuple(vs)
        if key not in products:
            products[key] = free_product({i: laws[i] for i in range(len(vs))}, {v: i for i, v in enumerate(vs)})
        return products[key](T)

    return TrafficDistribution(rule, "freeprod(" + ";".join(l.description for l in laws) + ")")


def relabel_law(d: TrafficDistribution, mapping: Mapping[str, str]) -> TrafficDistribution:
    """Law of the renamed variables: evaluate ``d`` after renaming back."""
    inverse = {v: k for k, v in mapping.items()}

    def rule(T):
        return d(StarTestGraph(T.vertex_count, [Edge(e.src, e.dst, inverse.get(e.var, e.var), e.star) for e in T.edges]))

    return TrafficDistribution(rule, f"relabel({d.description})")


# ------------------------------------------------------------- moments


def star_moment(d: TrafficDistribution, word, guard: int = MOMENT_GUARD):
    """``Phi(w)``: trace of the cycle graph of the word."""
    word = list(word)
    if len(word) > guard:
        raise GuardError(f"word length {len(word)} exceeds guard {guard}")
    return tau_from_tau0(d, close(from_word(word)), guard=max(guard, 1))


def _as_polynomial(item) -> list[tuple[object, GraphMonomial]]:
    if isinstance(item, GraphMonomial):
        return [(ONE, item)]
    if isinstance(item, list) and item and isinstance(item[0], tuple) and len(item[0]) == 2 and isinstance(item[0][1], GraphMonomial):
        return item
    return [(ONE, from_word(item))]


def mixed_star_moment(d: TrafficDistribution, factors: Sequence, guard: int = MOMENT_GUARD):
    """``Phi(P_1 P_2 ... P_k)`` for factors given as words, monomials or
    polynomials ``[(coefficient, monomial), ...]``, expanded multilinearly."""
    polys = [_as_polynomial(f) for f in factors]
    total = ZERO
    terms = [(ONE, [])]
    for poly in polys:
        terms = [(c * c2, ms + [m]) for c, ms in terms for c2, m in poly]
    for c, ms in terms:
        if c == 0:
            continue
        T = close(product(ms))
        if T.vertex_count > guard:
            raise GuardError(f"test graph with {T.vertex_count} vertices exceeds guard {guard}")
        total = total + c * tau_from_tau0(d, T, guard=guard)
    return total


def phi(d: TrafficDistribution, t: GraphMonomial, guard: int = MOMENT_GUARD):
    """``Phi(t) = tau[close(t)]``."""
    return tau_from_tau0(d, close(t), guard=guard)


def kappa(d: TrafficDistribution, t1: GraphMonomial, t2: GraphMonomial, guard: int = MOMENT_GUARD):
    """``Phi(t1 o t2) - Phi(t1) Phi(t2)``."""
    return phi(d, hadamard([t1, t2]), guard) - phi(d, t1, guard) * phi(d, t2, guard)


# ------------------------------------------------------------- free oracle


def free_cumulants(moments: Sequence) -> list:
    """Free cumulants ``k_1..k_n`` from moments ``m_0..m_n`` by NC-partition recursion."""
    n = len(moments) - 1
    kappas = [None] * (n + 1)
    for k in range(1, n + 1):
        acc = ZERO
        for p in enumerate_noncrossing_partitions(k):
            if len(p) == 1:
                continue
            term = ONE
            for b in p.blocks:
                term = term * kappas[len(b)]
            acc = acc + term
        kappas[k] = moments[k] - acc
    return kappas


def moments_from_free_cumulants(kappas: Sequence, n: int) -> list:
    """Moments ``m_0..m_n`` from free cumulants ``kappas[1..n]``."""
    out = [ONE]
    for k in range(1, n + 1):
        acc = ZERO
        for p in enumerate_noncrossing_partitions(k):
            term = ONE
            for b in p.blocks:
                term = term * kappas[len(b)]
            acc = acc + term
        out.append(acc)
    return out


def nc_free_oracle(moments: Mapping[str, Sequence], word: Sequence[str]):
    """Mixed moment of free self-adjoint variables.

    Parameters
    ----------
    moments : mapping
        Variable -> moment sequence ``m_0, m_1, ...`` (long enough for ``word``).
    word : sequence of variable names (a trailing ``*`` is ignored).

    Mixed free cumulants vanish, so the moment is the sum over non-crossing
    partitions of ``word`` whose blocks are single-variable.
    """
    letters = [w[:-1] if w.endswith("*") else w for w in (x if isinstance(x, str) else x[0] for x in word)]
    n = len(letters)
    cums = {}
    for v in set(letters):
        seq = list(moments[v])
        if len(seq) <= n:
            raise ContractError(f"need moments of {v} up to order {n}, got {len(seq) - 1}")
        cums[v] = free_cumulants(seq[: n + 1])
    total = ZERO
    for p in enumerate_noncrossing_partitions(n):
        term = ONE
        for b in p.blocks:
            vs = {letters[i] for i in b}
            if len(vs) > 1:
                term = ZERO
                break
            term = term * cums[vs.pop()][len(b)]
        total = total + term
    return total


# ------------------------------------------------------------- CLT


def _check_p(p):
    if not 0 <= p <= 1:
        raise DomainError(f"CLT parameter p={p} outside [0, 1]")


def clt_tau0(p, T: StarGraph):
    """Injective law of ``sqrt(p) d + sqrt(1-p) s`` on a cyclic graph.

    Loops are stripped; each vertex must carry an even number ``2 m_k`` of
    them and the rest must be a double tree on ``K`` vertices. The value is
    ``(1-p)^(K-1) * prod p^(m_k) (2 m_k - 1)!!``.
    """
    _check_p(p)
    _single = len(T.variables) <= 1
    if not _single:
        raise ContractError("clt law takes one variable")
    R = unstar(T)
    if not classify(R).is_cyclic:
        raise ContractError("clt_tau0 is defined on cyclic test graphs")
    loops = Counter(e.src for e in R.edges if e.src == e.dst)
    if any(c % 2 for c in loops.values()):
        return ZERO
    rest = StarGraph(R.vertex_count, [e for e in R.edges if e.src != e.dst])
    if not classify(rest).is_double_tree:
        return ZERO
    K = R.vertex_count
    p = Fraction(p) if not isinstance(p, float) else p
    out = (1 - p) ** (K - 1)
    for c in loops.values():
        out = out * p ** (c // 2) * double_factorial(c - 1)
    return out


def clt_law(p) -> TrafficDistribution:
    """Law of the CLT limit on cyclic graphs (non-cyclic graphs raise)."""
    _check_p(p)
    return TrafficDistribution(lambda T: clt_tau0(p, T), f"clt:p={p}")


def clt_moment(p, k: int, guard: int = CLT_GUARD):
    """``Phi(m^k)`` as the sum of :func:`clt_tau0` over quotients of the k-cycle."""
    _check_p(p)
    if k > guard:
        raise GuardError(f"moment order {k} exceeds guard {guard}")
    if k == 0:
        return ONE
    C = close(from_word([("x", False)] * k))
    total = ZERO
    for part in enumerate_partitions(k):
        total = total + clt_tau0(p, quotient(C, part))
    return total


def clt_parameter(d: TrafficDistribution, var: str = "x"):
    """Share ``p`` of the variance carried by the double loop.

    Raises
    ------
    DomainError
        If the implied parameter is outside ``[0, 1]``.
    """
    double_loop = StarTestGraph(1, [(0, 0, var), (0, 0, var)])
    double_edge = StarTestGraph(2, [(0, 1, var), (1, 0, var)])
    a, b = d(double_loop), d(double_edge)
    total = a + b
    if total == 0:
        raise DomainError("variance is zero; CLT parameter undefined")
    p = a / total
    _check_p(p)
    return p


def clt_oracle_moment(p, k: int):
    """``Phi(m^k)`` for the free sum of ``sqrt(p)`` Gaussian and ``sqrt(1-p)`` semicircle, from free cumulants."""
    p = Fraction(p) if not isinstance(p, float) else p
    gauss = [ZERO if j % 2 else Fraction(double_factorial(j - 1)) for j in range(k + 1)]
    kg = free_cumulants(gauss)
    kappas = [None] + [ZERO] * k
    for j in range(1, k + 1):
        if j % 2:
            continue
        # Scaling by sqrt(p) multiplies the j-th cumulant by p^(j/2).
        kappas[j] = p ** (j // 2) * kg[j] + (((1 - p) ** (j // 2)) if j == 2 else ZERO)
    return moments_from_free_cumulants(kappas, k)[k]


# ------------------------------------------------------------- transposes


def _reverse_vars(T: StarGraph, variables=None) -> StarTestGraph:
    return StarTestGraph(
        T.vertex_count,
        [Edge(e.dst, e.src, e.var, e.star) if variables is None or e.var in variables else e for e in T.edges],
    )


def transpose_law(d: TrafficDistribution, variables=None) -> TrafficDistribution:
    """Law of the transposes: edges of ``variables`` (default all) reversed before ``d``."""
    vs = None if variables is None else set(variables)
    return TrafficDistribution(lambda T: d(_reverse_vars(T, vs)), f"transpose({d.description})")


def joint_with_transpose(d: TrafficDistribution, x: str = "x", y: str = "y") -> TrafficDistribution:
    """Joint law of ``(x, y = x^T)``: reverse the ``y`` edges, rename them ``x``, apply ``d``."""

    def rule(T):
        es = [Edge(e.dst, e.src, x, e.star) if e.var == y else e for e in T.edges]
        return d(StarTestGraph(T.vertex_count, es))

    return TrafficDistribution(rule, f"with_transpose({d.description})")


# ------------------------------------------------------------- diagonal


def diagonal_law(moment: Callable[[Counter], object], description: str = "diagonal") -> TrafficDistribution:
    """Law supported on one-vertex graphs.

    ``moment`` receives a ``Counter`` of loop labels ``(var, star)`` and
    returns the joint moment ``E[prod X_var^(star)]``.
    """

    def rule(T):
        if T.vertex_count != 1:
            return ZERO
        return moment(Counter((e.var, e.star) for e in T.edges))

    return TrafficDistribution(rule, description)


def diagonal_law_from_real_moments(moments: Mapping[str, Callable[[int], object]]) -> TrafficDistribution:
    """Diagonal law of independent real variables with ``moments[v](k) = E[X_v^k]``."""

    def moment(loops: Counter):
        per: Counter = Counter()
        for (v, _), c in loops.items():
            if v not in moments:
                raise ContractError(f"no moments for variable {v!r}")
            per[v] += c
        out = ONE
        for v, c in per.items():
            out = out * moments[v](c)
        return out

    return diagonal_law(moment, "diagonal(" + ",".join(sorted(moments)) + ")")


def semicircular_pair() -> TrafficDistribution:
    """Traffic-free product of two real semicircular variables ``x`` and ``y``."""
    s = tau0_semicircular(False)
    return free_product({"x": s, "y": s}, {"x": "x", "y": "y"})
