"""Random matrix ensembles and seeded Monte Carlo estimation.

Random streams are Philox generators keyed by ``(seed, group, replicate)``,
so the matrices drawn for one independence group do not depend on how many
other groups exist or on the order replicates are run in.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractError
from .evaluation import MatrixFamily, injective_trace, injective_trace_mobius, trace_test_graph, _falling, ENUMERATION_BUDGET
from .graph import StarGraph

KINDS = (
    "wigner_real",
    "wigner_complex",
    "haar_unitary",
    "uniform_permutation",
    "all_ones_J",
    "iid_entries",
    "bernoulli_mask",
    "diagonal_iid",
    "deterministic",
    "hadamard",
    "linear",
)


# ------------------------------------------------------------- entry laws


def entry_sampler(law: str | dict) -> Callable[[np.random.Generator, tuple], np.ndarray]:
    """Sampler for a real entry law given by name or ``{"name": ..., params}``.

    Laws: ``rademacher``, ``gaussian``, ``bernoulli`` (q), ``signed_bernoulli``
    (q, values 0 or +-1), ``dirac`` (c).
    """
    if isinstance(law, str):
        law = {"name": law}
    name = law.get("name")
    if name == "rademacher":
        return lambda rng, shape: rng.integers(0, 2, size=shape) * 2.0 - 1.0
    if name == "gaussian":
        return lambda rng, shape: rng.standard_normal(shape)
    if name == "bernoulli":
        q = _prob(law)
        return lambda rng, shape: (rng.random(shape) < q).astype(float)
    if name == "signed_bernoulli":
        q = _prob(law)

        def draw(rng, shape):
            keep = rng.random(shape) < q
            sign = rng.integers(0, 2, size=shape) * 2.0 - 1.0
            return keep * sign

        return draw
    if name == "dirac":
        c = float(law.get("c", 1.0))
        return lambda rng, shape: np.full(shape, c)
    raise ContractError(f"unknown entry law {name!r}")


def _prob(law: dict) -> float:
    q = float(law.get("q", 0.5))
    if not 0.0 <= q <= 1.0:
        raise ContractError(f"probability q={q} outside [0, 1]")
    return q


# ------------------------------------------------------------- specs


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """Description of a random N x N matrix.

    Parameters by kind:

    ``wigner_real`` / ``wigner_complex``
        ``entry`` (default ``rademacher``), ``diagonal`` (defaults to ``entry``).
    ``haar_unitary``, ``uniform_permutation``
        none.
    ``all_ones_J``
        ``normalized`` (default True: entries 1/N; False: entries 1).
    ``iid_entries``
        ``law``, ``scale`` (default 1), ``symmetric`` (default False),
        ``zero_diagonal`` (default False), ``complex`` (default False:
        real entries; True: ``(x + iy)/sqrt 2``).
    ``bernoulli_mask``
        ``q``.
    ``diagonal_iid``
        ``law`` (default ``gaussian``).
    ``deterministic``
        ``matrix``.
    ``hadamard``
        ``factors``: specs whose independent samples are multiplied entrywise.
    ``linear``
        ``terms``: list of ``(coefficient, spec)`` with independent samples.
    """

    kind: str
    N: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown ensemble kind {self.kind!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ContractError(f"dimension N must be a positive integer, got {self.N!r}")
        p = self.params
        if self.kind == "bernoulli_mask":
            _prob(p)
        if self.kind == "deterministic":
            m = np.asarray(p.get("matrix"))
            if m.shape != (self.N, self.N):
                raise ContractError("deterministic matrix must be N x N")
        if self.kind == "hadamard":
            if any(f.N != self.N for f in p["factors"]):
                raise ContractError("hadamard factors must share the dimension")
        if self.kind == "linear":
            if any(s.N != self.N for _, s in p["terms"]):
                raise ContractError("linear terms must share the dimension")
        if self.kind in ("wigner_real", "wigner_complex", "iid_entries", "diagonal_iid"):
            for key in ("entry", "diagonal", "law"):
                if key in p:
                    entry_sampler(p[key])

    def with_N(self, N: int) -> "EnsembleSpec":
        """Same ensemble at another dimension (deterministic kinds cannot be resized)."""
        p = dict(self.params)
        if self.kind == "deterministic":
            if N != self.N:
                raise ContractError("cannot resize a deterministic matrix")
            return self
        if self.kind == "hadamard":
            p["factors"] = tuple(f.with_N(N) for f in p["factors"])
        if self.kind == "linear":
            p["terms"] = tuple((c, s.with_N(N)) for c, s in p["terms"])
        return EnsembleSpec(self.kind, N, p)


def hadamard_compose(a: EnsembleSpec, b: EnsembleSpec) -> EnsembleSpec:
    """Entrywise product of independent samples of ``a`` and ``b``."""
    if a.N != b.N:
        raise ContractError(f"dimension mismatch {a.N} vs {b.N}")
    return EnsembleSpec("hadamard", a.N, {"factors": (a, b)})


def linear_combination(terms: Sequence[tuple[float, EnsembleSpec]]) -> EnsembleSpec:
    terms = tuple((complex(c) if isinstance(c, complex) else float(c), s) for c, s in terms)
    return EnsembleSpec("linear", terms[0][1].N, {"terms": terms})


def _hermitian(upper: np.ndarray, diag: np.ndarray) -> np.ndarray:
    N = diag.shape[0]
    iu = np.triu_indices(N, 1)
    a = np.zeros((N, N), dtype=upper.dtype)
    a[iu] = upper
    a = a + a.conj().T
    a[np.arange(N), np.arange(N)] = diag
    return a


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample(spec: EnsembleSpec, seed) -> np.ndarray:
    """Draw one matrix of the ensemble; ``seed`` is an int, SeedSequence or Generator."""
    rng = _rng(seed)
    N, p, k = spec.N, spec.params, spec.kind
    if k in ("wigner_real", "wigner_complex"):
        draw = entry_sampler(p.get("entry", "rademacher"))
        draw_diag = entry_sampler(p.get("diagonal", p.get("entry", "rademacher")))
        m = N * (N - 1) // 2
        if k == "wigner_real":
            upper = draw(rng, (m,))
        else:
            upper = (draw(rng, (m,)) + 1j * draw(rng, (m,))) / np.sqrt(2.0)
        diag = draw_diag(rng, (N,))
        return _hermitian(upper, diag) / np.sqrt(N)
    if k == "haar_unitary":
        z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
        q, r = np.linalg.qr(z)
        d = np.diagonal(r)
        return q * (d / np.abs(d))
    if k == "uniform_permutation":
        perm = rng.permutation(N)
        u = np.zeros((N, N))
        u[np.arange(N), perm] = 1.0
        return u
    if k == "all_ones_J":
        return np.full((N, N), 1.0 / N if p.get("normalized", True) else 1.0)
    if k == "iid_entries":
        draw = entry_sampler(p.get("law", "gaussian"))
        scale = p.get("scale", 1.0)
        if p.get("complex", False):
            gen = lambda shape: (draw(rng, shape) + 1j * draw(rng, shape)) / np.sqrt(2.0)  # noqa: E731
        else:
            gen = lambda shape: draw(rng, shape)  # noqa: E731
        if p.get("symmetric", False):
            a = _hermitian(gen((N * (N - 1) // 2,)), gen((N,)).real)
        else:
            a = gen((N, N))
        if p.get("zero_diagonal", False):
            a[np.arange(N), np.arange(N)] = 0
        return a * scale
    if k == "bernoulli_mask":
        return (rng.random((N, N)) < _prob(p)).astype(float)
    if k == "diagonal_iid":
        return np.diag(entry_sampler(p.get("law", "gaussian"))(rng, (N,)))
    if k == "deterministic":
        return np.asarray(p["matrix"])
    if k == "hadamard":
        out = np.ones((N, N))
        for f in p["factors"]:
            out = out * sample(f, rng)
        return out
    if k == "linear":
        out = np.zeros((N, N), dtype=complex)
        for c, s in p["terms"]:
            out = out + c * sample(s, rng)
        return out
    raise ContractError(f"unknown ensemble kind {k!r}")


def stream(seed: int, group: str, replicate: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, group, replicate)``."""
    key = (zlib.crc32(str(group).encode()), int(replicate))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=key)))


def sample_family(specs: Mapping[str, EnsembleSpec], groups: Mapping[str, str] | None, seed: int, replicate: int) -> MatrixFamily:
    """One joint sample: each group draws its variables, in sorted order, from its own stream."""
    groups = dict(groups or {})
    by_group: dict[str, list[str]] = {}
    for v in sorted(specs):
        by_group.setdefault(str(groups.get(v, v)), []).append(v)
    mats = {}
    for g, vs in sorted(by_group.items()):
        rng = stream(seed, g, replicate)
        for v in vs:
            mats[v] = sample(specs[v], rng)
    return MatrixFamily(mats)


# ------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class MCReport:
    """Per-statistic Monte Carlo summary.

    ``std`` is the per-replicate sample standard deviation (complex modulus),
    ``stderr = std / sqrt(n)``.
    """

    labels: tuple
    mean: tuple
    stderr: tuple
    std: tuple
    n: int
    seed: int
    values: np.ndarray = field(repr=False, compare=False)

    def row(self, i: int) -> dict:
        return {"label": self.labels[i], "mean": self.mean[i], "stderr": self.stderr[i], "std": self.std[i], "n": self.n}


def _replicate_values(Ts, statistic, products, specs, groups, seed, replicate):
    F = sample_family(specs, groups, seed, replicate)
    cache: dict = {}
    vals = []
    for T in Ts:
        if statistic == "trace":
            vals.append(complex(trace_test_graph(T, F).value))
        elif _falling(F.N, T.vertex_count) <= ENUMERATION_BUDGET:
            vals.append(complex(injective_trace(T, F).value))
        else:
            vals.append(complex(injective_trace_mobius(T, F, cache)))
    traces = {}
    for prod in products:
        acc = 1 + 0j
        for i in prod:
            if i not in traces:
                traces[i] = complex(trace_test_graph(Ts[i], F).value)
            acc *= traces[i]
        vals.append(acc)
    return vals


def _run_chunk(args):
    Ts, statistic, products, specs, groups, seed, reps = args
    return [_replicate_values(Ts, statistic, products, specs, groups, seed, r) for r in reps]


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TRAFFICS_JOBS", "1")))
    except ValueError:
        return 1


def mc_estimate(
    Ts: Sequence[StarGraph],
    specs: Mapping[str, EnsembleSpec],
    groups: Mapping[str, str] | None = None,
    samples: int = 100,
    seed: int = 0,
    statistic: str = "trace",
    products: Sequence[Sequence[int]] = (),
    jobs: int | None = None,
) -> MCReport:
    """Monte Carlo means of traces of ``Ts`` under independent samples.

    Parameters
    ----------
    statistic : {"trace", "injective"}
        Plain normalized trace or injective trace of each graph.
    products : sequence of index tuples
        Extra statistics ``prod_i (1/N) Tr T_i`` (plain traces), reported after
        the per-graph ones; used for decorrelation checks.
    jobs : int, optional
        Worker processes; the reduction is ordered by replicate so results do
        not depend on ``jobs``.
    """
    if statistic not in ("trace", "injective"):
        raise ValueError(f"unknown statistic {statistic!r}")
    missing = sorted({v for T in Ts for v in T.variables} - set(specs))
    if missing:
        raise ContractError(f"no ensemble for variable(s) {', '.join(missing)}")
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    Ts = list(Ts)
    products = [tuple(p) for p in products]
    reps = list(range(samples))
    if jobs == 1:
        rows = _run_chunk((Ts, statistic, products, specs, groups, seed, reps))
    else:
        chunks = [reps[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_chunk, [(Ts, statistic, products, specs, groups, seed, c) for c in chunks]))
        rows = [None] * samples
        for c, part in zip(chunks, parts):
            for r, v in zip(c, part):
                rows[r] = v
    values = np.array(rows, dtype=complex).reshape(samples, len(Ts) + len(products))
    mean = values.mean(axis=0)
    if samples > 1:
        std = np.sqrt(np.sum(np.abs(values - mean) ** 2, axis=0) / (samples - 1))
    else:
        std = np.zeros(values.shape[1])
    labels = tuple([f"T{i}" for i in range(len(Ts))] + ["prod(" + ",".join(f"T{i}" for i in p) + ")" for p in products])
    return MCReport(
        labels=labels,
        mean=tuple(complex(m) for m in mean),
        stderr=tuple(float(s / np.sqrt(samples)) for s in std),
        std=tuple(float(s) for s in std),
        n=samples,
        seed=seed,
        values=values,
    )
