"""Limiting injective traffic distributions and graphon densities.

A ``TrafficDistribution`` wraps a rule ``T -> tau0[T]``; the rule always
receives the canonical representative of ``T``, so it is automatically
invariant under relabeling. Values are exact (``Fraction``) whenever the
inputs are.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import ContractError, ParseError
from .partitions import catalan
from .graph import (
    StarGraph,
    StarTestGraph,
    canonical_graph,
    canonicalize,
    classify,
    is_directed_line,
    is_tree,
    unstar,
)

ONE = Fraction(1)
ZERO = Fraction(0)


@dataclass(frozen=True)
class Support:
    """Necessary conditions for a nonzero value, used to prune partition sums.

    Each condition must stay violated when more vertices are merged: loops
    never disappear and pair multiplicities only grow. With
    ``exact_pair_multiplicity = m`` every vertex pair carries 0 or ``m``
    edges, so at most ``|E| / m`` distinct pairs occur.
    """

    no_loops: bool = False
    max_pair_multiplicity: int | None = None
    vertices_for_edges: Callable[[int], int] | None = None
    exact_pair_multiplicity: int | None = None


DOUBLE_TREE_SUPPORT = Support(True, 2, lambda e: e // 2 + 1 if e % 2 == 0 else -1, 2)


@dataclass(eq=False)
class TrafficDistribution:
    """Injective traffic distribution: canonical test graph -> value."""

    evaluator: Callable[[StarGraph], object]
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False)
    support: Support | None = None

    def __call__(self, T: StarGraph):
        key = canonicalize(T).bytes
        if key not in self._cache:
            self._cache[key] = self.evaluator(canonical_graph(T))
        return self._cache[key]

    tau0 = __call__

    def __repr__(self) -> str:
        return f"TrafficDistribution({self.description!r})"


@dataclass(eq=False)
class GraphonDensity:
    """Limit injective density delta0, evaluated on canonical graphs."""

    evaluator: Callable[[StarGraph], object]
    description: str = ""
    moments: EntryMoments | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, T: StarGraph):
        key = canonicalize(T).bytes
        if key not in self._cache:
            self._cache[key] = self.evaluator(canonical_graph(T))
        return self._cache[key]


def _single_variable(T: StarGraph, law: str) -> None:
    if len(T.variables) > 1:
        raise ContractError(f"{law} law takes one variable, graph uses {', '.join(T.variables)}")


def tau0_semicircular(complex_case: bool = False) -> TrafficDistribution:
    """Double-tree indicator; twins must be opposite in the complex case.

    The variable is self-adjoint, so star flags are dropped first: a starred
    edge ``v -> w`` reads ``conj(X[w, v]) = X[v, w]``.
    """

    def rule(T):
        _single_variable(T, "semicircular")
        flags = classify(unstar(T))
        ok = flags.is_double_tree_opposite if complex_case else flags.is_double_tree
        return ONE if ok else ZERO

    return TrafficDistribution(rule, "semicircular_complex" if complex_case else "semicircular_real", support=DOUBLE_TREE_SUPPORT)


def tau0_circular() -> TrafficDistribution:
    """Indicator of double trees with opposite twins carrying adjoint labels.

    This is the limit for iid complex entries scaled by ``1/sqrt(N)``; it
    agrees with :func:`tau0_haar` on double trees only.
    """

    def rule(T):
        _single_variable(T, "circular")
        return ONE if classify(T).is_double_tree_opposite_adjoint else ZERO

    return TrafficDistribution(rule, "circular", support=DOUBLE_TREE_SUPPORT)


def _perm_cycles(perm: Sequence[int]) -> list[int]:
    seen = [False] * len(perm)
    out = []
    for i in range(len(perm)):
        if seen[i]:
            continue
        k, j = 0, i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            k += 1
        out.append(k)
    return out


def _weingarten_leading(perm: Sequence[int]) -> int:
    """Leading coefficient of the unitary Weingarten function: prod (-1)^(c-1) Cat(c-1)."""
    out = 1
    for c in _perm_cycles(perm):
        out *= (-1) ** (c - 1) * catalan(c - 1)
    return out


def _matchings(src: list, dst: list):
    """Bijections k -> perm[k] with ``src[k] == dst[perm[k]]``."""
    n = len(src)
    used = [False] * n
    perm = [0] * n

    def rec(k):
        if k == n:
            yield tuple(perm)
            return
        for j in range(n):
            if not used[j] and dst[j] == src[k]:
                used[j] = True
                perm[k] = j
                yield from rec(k + 1)
                used[j] = False

    yield from rec(0)


def tau0_haar() -> TrafficDistribution:
    """Limit injective law of a Haar unitary matrix.

    Each plain edge ``v -> w`` reads ``U[v, w]`` and each starred edge
    ``v -> w`` reads ``conj(U[w, v])``. By the Weingarten formula the
    injective trace is ``N^(|V|-1) * sum Wg(sigma tau^-1)`` over bijections
    ``sigma`` (``tau``) from ``U`` factors to ``conj(U)`` factors with equal
    row (column) vertices, and ``Wg(pi) ~ N^(-n-|pi|) * Moeb(pi)``. Only pairs
    with ``|V| = n + 1 + |sigma tau^-1|`` survive. On double trees with
    opposite adjoint twins the value is 1.
    """

    def rule(T):
        _single_variable(T, "haar")
        plain = [(e.src, e.dst) for e in T.edges if not e.star]
        conj = [(e.dst, e.src) for e in T.edges if e.star]
        n = len(plain)
        if n != len(conj):
            return ZERO
        if n == 0:
            return ONE if T.vertex_count == 1 else ZERO
        total = 0
        cols = list(_matchings([c for _, c in plain], [c for _, c in conj]))
        if not cols:
            return ZERO
        for sigma in _matchings([r for r, _ in plain], [r for r, _ in conj]):
            for tau in cols:
                inv = [0] * n
                for k, t in enumerate(tau):
                    inv[t] = k
                pi = [sigma[inv[j]] for j in range(n)]
                length = n - len(_perm_cycles(pi))
                exponent = T.vertex_count - 1 - n - length
                if exponent > 0:
                    raise ContractError(f"Haar injective trace diverges on {T}")
                if exponent == 0:
                    total += _weingarten_leading(pi)
        return Fraction(total)

    return TrafficDistribution(rule, "haar")


def tau0_permutation() -> TrafficDistribution:
    """Indicator that T reduces to a directed line (stars reversed, multiplicity collapsed)."""

    def rule(T):
        _single_variable(T, "permutation")
        return ONE if is_directed_line(T) else ZERO

    return TrafficDistribution(rule, "permutation")


def tau0_jlimit() -> TrafficDistribution:
    """Tree indicator, multiplicities counted (``|V| = |E| + 1``)."""
    return TrafficDistribution(lambda T: ONE if is_tree(T) else ZERO, "jlimit")


def tau0_jfinite(N: int) -> TrafficDistribution:
    """Exact injective trace of the all-``1/N`` matrix: ``((N-1)!/(N-|V|)!) N^{-|E|}``."""

    def rule(T):
        n, e = T.vertex_count, len(T.edges)
        if n > N:
            return ZERO
        count = 1
        for k in range(1, n):
            count *= N - k
        return Fraction(count, N ** e)

    return TrafficDistribution(rule, f"jfinite:{N}")


def tabulated(values: Mapping, default=None, description: str = "tabulated") -> TrafficDistribution:
    """Law from a table keyed by canonical bytes or by graphs."""
    table = {}
    for k, v in values.items():
        table[k if isinstance(k, bytes) else canonicalize(k).bytes] = v

    def rule(T):
        key = canonicalize(T).bytes
        if key in table:
            return table[key]
        if default is None:
            raise ContractError(f"tabulated law has no value for {T}")
        return default

    return TrafficDistribution(rule, description)


# ------------------------------------------------------------- graphons


class EntryMoments:
    """Joint moments ``E[X^a conj(X)^b]`` of one entry law.

    Parameters
    ----------
    moments : callable or mapping
        ``(a, b) -> value``. A mapping missing a needed key raises
        ``ContractError``.
    """

    def __init__(self, moments, description: str = ""):
        self._m = moments
        self.description = description

    def __call__(self, a: int, b: int):
        if a == 0 and b == 0:
            return ONE
        if callable(self._m):
            return self._m(a, b)
        if (a, b) not in self._m:
            raise ContractError(f"moment E[X^{a} conj(X)^{b}] not supplied")
        return self._m[(a, b)]


def real_moments(fn: Callable[[int], object], description: str = "") -> EntryMoments:
    """Moments of a real law from ``k -> E[X^k]``."""
    return EntryMoments(lambda a, b: fn(a + b), description)


def bernoulli_moments(q) -> EntryMoments:
    q = Fraction(q) if not isinstance(q, float) else q
    return real_moments(lambda k: q if k else ONE, f"bernoulli({q})")


def dirac_moments(c) -> EntryMoments:
    c = Fraction(c) if not isinstance(c, float) else c
    return real_moments(lambda k: c ** k, f"dirac({c})")


def rademacher_moments() -> EntryMoments:
    return real_moments(lambda k: ZERO if k % 2 else ONE, "rademacher")


def gaussian_moments() -> EntryMoments:
    from .partitions import double_factorial

    return real_moments(lambda k: ZERO if k % 2 else Fraction(double_factorial(k - 1)), "gaussian")


def signed_bernoulli_moments(q) -> EntryMoments:
    q = Fraction(q) if not isinstance(q, float) else q
    return real_moments(lambda k: ONE if k == 0 else (ZERO if k % 2 else q), f"signed_bernoulli({q})")


def graphon_density_iid(moments: EntryMoments, symmetric: bool = False, diagonal: EntryMoments | None = None) -> GraphonDensity:
    """Product over vertex pairs of the joint moment of the entries they carry.

    With ``symmetric=False`` the entries ``X[i, j]`` are independent for all
    ordered pairs; with ``symmetric=True`` the matrix is Hermitian and
    ``X[j, i] = conj(X[i, j])``. Loops use the ``diagonal`` law (default: the
    same law).
    """
    diagonal = diagonal or moments

    def rule(T):
        counts: Counter = Counter()
        for e in T.edges:
            # A starred edge v->w reads conj(X[w, v]).
            i, j, conj = (e.dst, e.src, True) if e.star else (e.src, e.dst, False)
            if symmetric and i > j:
                i, j, conj = j, i, not conj
            counts[(i, j, conj)] += 1
        keys = {(i, j) for i, j, _ in counts}
        out = ONE
        for i, j in sorted(keys):
            a, b = counts[(i, j, False)], counts[(i, j, True)]
            if i == j and symmetric:
                a, b = a + b, 0  # diagonal of a Hermitian matrix is real
            out = out * (diagonal(a, b) if i == j else moments(a, b))
            if out == 0:
                return out
        return out

    tag = f"iid[{moments.description}{', symmetric' if symmetric else ''}]"
    return GraphonDensity(rule, tag, moments)


def compose_hadamard(law: TrafficDistribution, density: GraphonDensity) -> TrafficDistribution:
    """Pointwise product ``tau0[T] * delta0[T]``."""

    def rule(T):
        a = law(T)
        return a * density(T) if a != 0 else a

    return TrafficDistribution(rule, f"hadamard({law.description},{density.description})")


def sqrtN_law(density: GraphonDensity) -> TrafficDistribution:
    """Double-tree gate times the density, for entries scaled by ``1/sqrt(N)``.

    Raises
    ------
    ContractError
        If the density is not strongly centered (nonzero on a single edge).
    """
    probe = StarTestGraph(2, [(0, 1, "x")])
    probe_star = StarTestGraph(2, [(0, 1, "x", True)])
    if density(probe) != 0 or density(probe_star) != 0:
        raise ContractError("sqrtN law needs strongly centered entries: density of a single edge is nonzero")

    def rule(T):
        return density(T) if classify(T).is_double_tree else ZERO

    return TrafficDistribution(rule, f"sqrtN({density.description})", support=DOUBLE_TREE_SUPPORT)


# ------------------------------------------------------------- registry


def _split_args(text: str, sep: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [s.strip() for s in out]


def _number(text: str):
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        raise ParseError(f"bad number {text!r}") from None


def parse_density(text: str) -> GraphonDensity:
    """``bernoulli(q)``, ``dirac(c)``, ``rademacher``, ``gaussian``, ``signed_bernoulli(q)``,
    each optionally wrapped as ``symmetric(...)``."""
    text = text.strip()
    name, _, rest = text.partition("(")
    arg = rest[:-1] if rest.endswith(")") else None
    if rest and arg is None:
        raise ParseError(f"unbalanced parentheses in {text!r}")
    name = name.strip()
    if name == "symmetric":
        inner = parse_density(arg)
        return graphon_density_iid(inner.moments, symmetric=True)
    table = {
        "bernoulli": lambda: bernoulli_moments(_number(arg)),
        "dirac": lambda: dirac_moments(_number(arg)),
        "signed_bernoulli": lambda: signed_bernoulli_moments(_number(arg)),
        "rademacher": rademacher_moments,
        "gaussian": gaussian_moments,
    }
    if name not in table:
        raise ParseError(f"unknown density {name!r}")
    return graphon_density_iid(table[name]())


def parse_law(text: str) -> TrafficDistribution:
    """Build a law from a registry name.

    Names: ``semicircular_real``, ``semicircular_complex``, ``haar``, ``circular``,
    ``permutation``, ``jlimit``, ``jfinite:N``, ``hadamard(law, density)``,
    ``sqrtN(density)``, ``clt:p=<value>``, ``diagonal(density)``, and
    ``freeprod(L1;L2;...)`` or ``freeprod(x=L1;y=L2)``. Positional free
    products bind laws to the graph's variables in sorted order.
    """
    from . import algebra

    text = text.strip()
    simple = {
        "semicircular_real": lambda: tau0_semicircular(False),
        "semicircular_complex": lambda: tau0_semicircular(True),
        "haar": tau0_haar,
        "circular": tau0_circular,
        "permutation": tau0_permutation,
        "jlimit": tau0_jlimit,
    }
    if text in simple:
        return simple[text]()
    if text.startswith("jfinite:"):
        return tau0_jfinite(int(text.split(":", 1)[1]))
    if text.startswith("clt:"):
        key, _, val = text[4:].partition("=")
        if key.strip() != "p":
            raise ParseError(f"clt law expects 'clt:p=<value>', got {text!r}")
        p = _number(val)
        return algebra.clt_law(p)
    name, _, rest = text.partition("(")
    if not rest.endswith(")"):
        raise ParseError(f"unknown law {text!r}")
    inner = rest[:-1]
    name = name.strip()
    if name == "hadamard":
        args = _split_args(inner, ",")
        if len(args) != 2:
            raise ParseError("hadamard(law, density) takes two arguments")
        return compose_hadamard(parse_law(args[0]), parse_density(args[1]))
    if name == "sqrtN":
        return sqrtN_law(parse_density(inner))
    if name == "diagonal":
        d = parse_density(inner)
        return algebra.diagonal_law(lambda loops: d.moments(*_loop_powers(loops)), f"diagonal({inner})")
    if name == "freeprod":
        args = _split_args(inner, ";")
        if all("=" in a and "(" not in a.split("=", 1)[0] for a in args):
            bound = {a.split("=", 1)[0].strip(): parse_law(a.split("=", 1)[1]) for a in args}
            fam = {v: v for v in bound}
            return algebra.free_product(bound, fam)
        laws = [parse_law(a) for a in args]
        return algebra.positional_free_product(laws)
    raise ParseError(f"unknown law {text!r}")


def _loop_powers(loops: Mapping) -> tuple[int, int]:
    if len({v for v, _ in loops}) > 1:
        raise ContractError("diagonal(density) law takes one variable")
    return sum(c for (v, s), c in loops.items() if not s), sum(c for (v, s), c in loops.items() if s)
