"""Evaluation of graph monomials and traces on concrete matrix families.

Every edge ``(v, w)`` labeled ``x`` reads ``A_x[phi(v), phi(w)]``; a starred
label reads ``A_x^*[phi(v), phi(w)] = conj(A_x[phi(w), phi(v)])``. Traces are
normalized by ``1/N``.

Plain traces are contracted with one index per vertex: parallel edges are
pre-multiplied entrywise, loops become diagonals, low-degree vertices are
eliminated with BLAS products and the rest goes to ``numpy.einsum``. Injective
traces are
computed by direct enumeration of injective maps when that is affordable and
otherwise by Möbius inversion over quotient graphs.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, GuardError, ParseError
from .graph import (
    GraphMonomial,
    NGraphMonomial,
    StarGraph,
    adjoint_n,
    canonicalize,
    merge,
    quotient,
)
from .partitions import enumerate_partitions, mobius_from_discrete

ENUMERATION_BUDGET = 2_000_000
TENSOR_GUARD = 2_000_000
EXACT_GUARD = 3_000_000
_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class MatrixFamily:
    """Labeled N x N matrices sharing one dimension.

    Matrices with ``object`` dtype (for example ``Fraction`` entries) are
    kept as such and evaluated exactly.
    """

    N: int
    entries: Mapping[str, np.ndarray]

    def __init__(self, entries: Mapping[str, np.ndarray], N: int | None = None):
        mats = {}
        for k, a in entries.items():
            a = np.asarray(a)
            if a.dtype != object:
                a = a.astype(complex if np.iscomplexobj(a) else float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ContractError(f"matrix {k!r} is not square")
            mats[str(k)] = a
        dims = {a.shape[0] for a in mats.values()}
        if N is None:
            if len(dims) != 1:
                raise ContractError("cannot infer N from an empty or inconsistent family")
            N = dims.pop()
        elif dims - {N}:
            raise ContractError(f"matrices must all be {N} x {N}")
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "entries", mats)
        object.__setattr__(self, "_adjoints", {})

    @property
    def exact(self) -> bool:
        return any(a.dtype == object for a in self.entries.values())

    def matrix(self, var: str, star: bool = False) -> np.ndarray:
        if var not in self.entries:
            raise ContractError(f"variable {var!r} is not bound in the matrix family")
        a = self.entries[var]
        if not star:
            return a
        if var not in self._adjoints:
            if a.dtype == object:
                self._adjoints[var] = np.vectorize(_conj, otypes=[object])(a.T)
            else:
                self._adjoints[var] = np.ascontiguousarray(a.conj().T)
        return self._adjoints[var]

    def permuted(self, sigma: Sequence[int]) -> "MatrixFamily":
        """Family conjugated by the permutation matrix sending ``i`` to ``sigma[i]``."""
        inv = np.argsort(np.asarray(sigma))
        return MatrixFamily({k: a[np.ix_(inv, inv)] for k, a in self.entries.items()}, self.N)

    def conjugated(self, U: np.ndarray) -> "MatrixFamily":
        return MatrixFamily({k: U @ a @ U.conj().T for k, a in self.entries.items()}, self.N)


def _conj(z):
    return z.conjugate() if hasattr(z, "conjugate") else z


# ------------------------------------------------------------- containers

_MAGIC = b"TRFAM\x00\x01\x00"


def save_family(F: MatrixFamily, path: str) -> None:
    """Write a family to ``path``: ``.csv`` gives the text container, anything else binary."""
    if str(path).endswith(".csv"):
        with open(path, "w") as fh:
            fh.write(f"N,{F.N}\n")
            fh.write("variables," + ",".join(F.entries) + "\n")
            for name, a in F.entries.items():
                a = np.asarray(a, dtype=complex)
                for i in range(F.N):
                    vals = ",".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in a[i])
                    fh.write(f"{name},{i},{vals}\n")
        return
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", F.N, len(F.entries)))
        for name in F.entries:
            raw = name.encode()
            fh.write(struct.pack("<I", len(raw)) + raw)
        for a in F.entries.values():
            arr = np.asarray(a, dtype="<c16")
            fh.write(arr.tobytes(order="C"))


def load_family(path: str) -> MatrixFamily:
    """Read a family written by :func:`save_family`."""
    if str(path).endswith(".csv"):
        with open(path) as fh:
            rows = [ln.rstrip("\n").split(",") for ln in fh if ln.strip()]
        try:
            if rows[0][0] != "N" or rows[1][0] != "variables":
                raise ValueError("expected 'N,<N>' then 'variables,...' header")
            N = int(rows[0][1])
            names = rows[1][1:]
            mats = {n: np.zeros((N, N), dtype=complex) for n in names}
            for r in rows[2:]:
                vals = np.array([float(x) for x in r[2:]])
                if vals.size != 2 * N:
                    raise ValueError(f"row for {r[0]!r} has {vals.size // 2} entries, expected {N}")
                mats[r[0]][int(r[1])] = vals[0::2] + 1j * vals[1::2]
        except (IndexError, KeyError, ValueError) as exc:
            raise ParseError(f"bad family CSV {path}: {exc}") from None
        return MatrixFamily(mats, N)
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_MAGIC):
        raise ParseError(f"{path} is not a matrix family file")
    off = len(_MAGIC)
    N, k = struct.unpack_from("<II", data, off)
    off += 8
    names = []
    for _ in range(k):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        names.append(data[off:off + ln].decode())
        off += ln
    size = N * N * 16
    if len(data) != off + k * size:
        raise ParseError(f"{path} is truncated or has trailing data")
    mats = {}
    for name in names:
        mats[name] = np.frombuffer(data[off:off + size], dtype="<c16").reshape(N, N).copy()
        off += size
    return MatrixFamily(mats, N)


# ------------------------------------------------------------- contraction


def _operands(G: StarGraph, F: MatrixFamily):
    """Einsum operands for the edge product of ``G``: one per vertex pair or loop vertex."""
    pairs: dict[tuple[int, int], object] = {}
    loops: dict[int, object] = {}
    for e in G.edges:
        a = F.matrix(e.var, e.star)
        if e.src == e.dst:
            d = np.diagonal(a)
            loops[e.src] = d if e.src not in loops else loops[e.src] * d
            continue
        if e.src > e.dst:
            key, m = (e.dst, e.src), a.T
        else:
            key, m = (e.src, e.dst), a
        pairs[key] = m if key not in pairs else pairs[key] * m
    return pairs, loops


def _contract(G: StarGraph, F: MatrixFamily, out: Sequence[int]):
    """Sum of the edge product over all vertex maps, free indices ``out`` (distinct).

    Floating families are contracted by eliminating low-degree vertices
    (leaves by matrix-vector products, degree-two vertices by matrix
    products); whatever remains goes to ``numpy.einsum``.
    """
    n = G.vertex_count
    if n > len(_LETTERS):
        raise GuardError(f"{n} vertices exceed the contraction guard {len(_LETTERS)}")
    pairs, loops = _operands(G, F)
    if F.exact:
        if F.N ** n > EXACT_GUARD:
            raise GuardError(f"exact contraction over {F.N}^{n} assignments exceeds guard")
        return _einsum_rest(pairs, loops, range(n), out, F, 1, exact=True)
    mats = dict(pairs)
    vecs = dict(loops)
    alive = set(range(n))
    keep = set(out)
    scalar = 1.0 + 0j

    def oriented(key, first):
        m = mats.pop(key)
        return m if key[0] == first else m.T

    while True:
        cands = sorted(alive - keep)
        if not cands:
            break
        incident = {v: [k for k in mats if v in k] for v in cands}
        v = min(cands, key=lambda u: (len(incident[u]), u))
        deg = len(incident[v])
        if deg > 2:
            break
        w = vecs.pop(v, None)
        alive.discard(v)
        if deg == 0:
            scalar *= w.sum() if w is not None else F.N
            continue
        if deg == 1:
            key = incident[v][0]
            u = key[0] if key[1] == v else key[1]
            m = oriented(key, u)
            r = m @ w if w is not None else m.sum(axis=1)
            vecs[u] = vecs[u] * r if u in vecs else r
            continue
        k1, k2 = incident[v]
        u = k1[0] if k1[1] == v else k1[1]
        z = k2[0] if k2[1] == v else k2[1]
        m1 = oriented(k1, u)
        m2 = oriented(k2, v)
        if w is not None:
            m1 = m1 * w[None, :]
        prod = m1 @ m2
        key = (u, z) if u < z else (z, u)
        if u > z:
            prod = prod.T
        mats[key] = mats[key] * prod if key in mats else prod
    return _einsum_rest(mats, vecs, sorted(alive), out, F, scalar)


def _einsum_rest(mats, vecs, alive, out, F, scalar, exact=False):
    ops, subs = [], []
    touched = set()
    for (u, v), m in sorted(mats.items()):
        ops.append(m)
        subs.append(_LETTERS[u] + _LETTERS[v])
        touched.update((u, v))
    for v, d in sorted(vecs.items()):
        ops.append(d)
        subs.append(_LETTERS[v])
        touched.add(v)
    for v in alive:
        if v not in touched:
            ops.append(np.array([Fraction(1)] * F.N, dtype=object) if exact else np.ones(F.N, dtype=complex))
            subs.append(_LETTERS[v])
    if not ops:
        return np.asarray(scalar)
    expr = ",".join(subs) + "->" + "".join(_LETTERS[v] for v in out)
    if exact:
        return np.einsum(expr, *ops)
    if len(ops) == 1:
        res = np.einsum(expr, ops[0])
    else:
        res = np.einsum(expr, *ops, optimize=_einsum_path(expr, tuple(o.shape for o in ops)))
    return scalar * res


@lru_cache(maxsize=4096)
def _einsum_path(expr: str, shapes: tuple):
    dummies = [np.empty(s, dtype=complex) for s in shapes]
    return np.einsum_path(expr, *dummies, optimize="greedy")[0]


def _check_vars(G: StarGraph, F: MatrixFamily) -> None:
    missing = sorted(set(G.variables) - set(F.entries))
    if missing:
        raise ContractError(f"variable(s) {', '.join(missing)} not bound in the matrix family")


def eval_monomial(t: GraphMonomial, F: MatrixFamily) -> np.ndarray:
    """N x N matrix with entry ``(i, j)`` summed over maps sending in to i and out to j."""
    _check_vars(t.graph, F)
    if t.input == t.output:
        d = _contract(t.graph, F, [t.input])
        out = np.zeros((F.N, F.N), dtype=d.dtype)
        if d.dtype == object:
            out[...] = Fraction(0)
        out[np.arange(F.N), np.arange(F.N)] = d
        return out
    return _contract(t.graph, F, [t.input, t.output])


@dataclass(frozen=True)
class ScalarStat:
    value: complex
    kind: str
    flag: str | None = None

    def __complex__(self):
        return complex(self.value)


def _scalar(x):
    if isinstance(x, np.ndarray):
        x = x.item()
    if isinstance(x, (np.complexfloating, np.floating)):
        x = complex(x)
    return x


def trace_test_graph(T: StarGraph, F: MatrixFamily) -> ScalarStat:
    """``(1/N) * sum over all maps V -> [N]`` of the edge product."""
    _check_vars(T, F)
    total = _scalar(_contract(T, F, []))
    if F.exact:
        return ScalarStat(Fraction(1, F.N) * total, "trace")
    return ScalarStat(total / F.N, "trace")


def _edge_arrays(T: StarGraph, F: MatrixFamily):
    return [(e.src, e.dst, F.matrix(e.var, e.star)) for e in T.edges]


def _injective_blocks(N: int, n: int, chunk: int):
    """Injective maps as index rows: prefixes enumerated, last vertex broadcast over ``[N]``."""
    if n == 0:
        yield np.zeros((1, 0), dtype=np.intp)
        return
    last = np.arange(N, dtype=np.intp)
    it = itertools.permutations(range(N), n - 1)
    per = max(1, chunk // N)
    while True:
        rows = list(itertools.islice(it, per))
        if not rows:
            return
        pre = np.array(rows, dtype=np.intp).reshape(len(rows), n - 1)
        full = np.concatenate([np.repeat(pre, N, axis=0), np.tile(last, len(pre))[:, None]], axis=1)
        yield full[(full[:, :-1] != full[:, -1:]).all(axis=1)]


@lru_cache(maxsize=8)
def _cached_blocks(N: int, n: int, chunk: int) -> tuple:
    return tuple(_injective_blocks(N, n, chunk))


def _injective_sum_enumerate(T: StarGraph, F: MatrixFamily, chunk: int = 100_000):
    n, N = T.vertex_count, F.N
    edges = _edge_arrays(T, F)
    exact = F.exact
    total = Fraction(0) if exact else 0j
    dtype = object if exact else np.result_type(float, *(m.dtype for _, _, m in edges))
    small = _falling(N, n) * max(n, 1) <= 1_000_000
    for idx in _cached_blocks(N, n, chunk) if small else _injective_blocks(N, n, chunk):
        if exact:
            prod = np.array([Fraction(1)] * len(idx), dtype=object)
        else:
            prod = np.ones(len(idx), dtype=dtype)
        for s, d, m in edges:
            prod = prod * m[idx[:, s], idx[:, d]]
        if exact:
            total += sum(prod, Fraction(0))
        else:
            total += complex(prod.sum())
    return total


def _falling(N: int, k: int) -> int:
    return math.perm(N, k) if k <= N else 0


def injective_trace(T: StarGraph, F: MatrixFamily, method: str = "auto") -> ScalarStat:
    """``(1/N) * sum over injective maps`` of the edge product.

    Parameters
    ----------
    method : {"auto", "enumerate", "mobius"}
        ``enumerate`` walks all injective maps; ``mobius`` inverts plain traces
        of the quotient graphs. ``auto`` enumerates when there are at most
        ``ENUMERATION_BUDGET`` injective maps.
    """
    _check_vars(T, F)
    n, N = T.vertex_count, F.N
    if n > N:
        return ScalarStat(Fraction(0) if F.exact else 0j, "injective_trace", flag="no_injection")
    if method == "auto":
        method = "enumerate" if _falling(N, n) <= ENUMERATION_BUDGET else "mobius"
    if method == "enumerate":
        total = _injective_sum_enumerate(T, F)
        return ScalarStat(Fraction(1, N) * total if F.exact else total / N, "injective_trace")
    if method != "mobius":
        raise ValueError(f"unknown method {method!r}")
    return ScalarStat(injective_trace_mobius(T, F), "injective_trace")


def injective_trace_mobius(T: StarGraph, F: MatrixFamily, cache: dict | None = None):
    """Möbius inversion of plain traces over vertex partitions; ``cache`` maps canonical bytes to traces."""
    total = Fraction(0) if F.exact else 0j
    for p in enumerate_partitions(T.vertex_count):
        Q = quotient(T, p)
        if cache is None:
            val = trace_test_graph(Q, F).value
        else:
            key = canonicalize(Q).bytes
            if key not in cache:
                cache[key] = trace_test_graph(Q, F).value
            val = cache[key]
        total += mobius_from_discrete(p) * val
    return total


def injective_density(T: StarGraph, F: MatrixFamily, mode: str = "uniform_expectation") -> ScalarStat:
    """Edge product under a uniform injective map (or under ``phi(v) = v``)."""
    n, N = T.vertex_count, F.N
    if n > N:
        raise ContractError(f"{n} vertices cannot be mapped injectively into [{N}]")
    if mode == "fixed_injection":
        _check_vars(T, F)
        prod = Fraction(1) if F.exact else 1 + 0j
        for s, d, m in _edge_arrays(T, F):
            prod = prod * m[s, d]
        return ScalarStat(_scalar(prod), "injective_density")
    if mode != "uniform_expectation":
        raise ValueError(f"unknown mode {mode!r}")
    tau0 = injective_trace(T, F).value
    # tau0 = ((N-1)! / (N-n)!) * delta0
    factor = Fraction(math.factorial(N - n), math.factorial(N - 1))
    return ScalarStat(tau0 * factor if F.exact else tau0 * float(factor), "injective_density")


def eval_n_graph(t: NGraphMonomial, F: MatrixFamily) -> np.ndarray:
    """Rank-n tensor indexed by the images of the roots."""
    _check_vars(t.graph, F)
    n = len(t.roots)
    if F.N ** n > TENSOR_GUARD:
        raise GuardError(f"tensor of size {F.N}^{n} exceeds guard {TENSOR_GUARD}")
    uniq = list(dict.fromkeys(t.roots))
    core = _contract(t.graph, F, uniq)
    if len(uniq) == n:
        return np.asarray(core)
    out = np.zeros((F.N,) * n, dtype=core.dtype)
    if core.dtype == object:
        out[...] = Fraction(0)
    grids = np.indices((F.N,) * len(uniq)).reshape(len(uniq), -1)
    pos = {r: k for k, r in enumerate(uniq)}
    index = tuple(grids[pos[r]] for r in t.roots)
    out[index] = core.reshape(-1)
    return out


def pairing(t1: NGraphMonomial, t2: NGraphMonomial, F: MatrixFamily):
    """``(1/N) * sum_i conj(t1(F)[i]) * t2(F)[i]`` over root multi-indices."""
    if len(t1.roots) != len(t2.roots):
        raise ContractError("pairing needs monomials with the same number of roots")
    a = eval_n_graph(t1, F)
    b = eval_n_graph(t2, F)
    if a.dtype == object or b.dtype == object:
        conj = np.vectorize(_conj, otypes=[object])(a)
        return Fraction(1, F.N) * (conj * b).sum()
    return complex(np.vdot(a.reshape(-1), b.reshape(-1))) / F.N


def pairing_via_merge(t1: NGraphMonomial, t2: NGraphMonomial, F: MatrixFamily):
    """Same value as :func:`pairing`, computed as the trace of the merged test graph."""
    return trace_test_graph(merge(adjoint_n(t1), t2), F).value


def check_permutation_equivariance(t: GraphMonomial, F: MatrixFamily, sigma) -> float:
    """``max |t(U F U*) - U t(F) U*|`` for a permutation ``sigma`` or an explicit unitary ``U``."""
    sigma = np.asarray(sigma)
    if sigma.ndim == 1:
        U = np.zeros((F.N, F.N))
        U[sigma, np.arange(F.N)] = 1.0
    else:
        U = sigma
    lhs = eval_monomial(t, F.conjugated(U))
    rhs = U @ eval_monomial(t, F) @ U.conj().T
    return float(np.max(np.abs(np.asarray(lhs, dtype=complex) - rhs)))
