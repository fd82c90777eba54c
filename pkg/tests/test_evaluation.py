import math
import random
from fractions import Fraction

import numpy as np
import pytest

from helpers import brute_trace, random_family, random_graph
from traffics.errors import ContractError, GuardError, ParseError
from traffics.evaluation import (
    MatrixFamily,
    check_permutation_equivariance,
    eval_monomial,
    eval_n_graph,
    injective_density,
    injective_trace,
    injective_trace_mobius,
    load_family,
    pairing,
    pairing_via_merge,
    save_family,
    trace_test_graph,
)
from traffics.graph import (
    GraphMonomial,
    NGraphMonomial,
    StarTestGraph,
    close,
    degree_op,
    from_word,
    hadamard,
    multiply,
    quotient,
    single_edge,
    substitute,
)
from traffics.partitions import enumerate_partitions

X, XS, Y = ("x", False), ("x", True), ("y", False)


def random_monomial(rng, **kw):
    g = random_graph(rng, **kw)
    return GraphMonomial(g, rng.randrange(g.vertex_count), rng.randrange(g.vertex_count))


def brute_monomial(t, F):
    N = F.N
    out = np.zeros((N, N), dtype=complex)
    import itertools

    for phi in itertools.product(range(N), repeat=t.vertex_count):
        p = 1
        for e in t.edges:
            p *= F.matrix(e.var, e.star)[phi[e.src], phi[e.dst]]
        out[phi[t.input], phi[t.output]] += p
    return out


@pytest.fixture
def F4():
    return random_family(np.random.default_rng(0), 4)


def test_family_validation():
    with pytest.raises(ContractError):
        MatrixFamily({"x": np.zeros((2, 3))})
    with pytest.raises(ContractError):
        MatrixFamily({"x": np.zeros((2, 2)), "y": np.zeros((3, 3))})
    with pytest.raises(ContractError):
        MatrixFamily({"x": np.eye(2)}).matrix("y")


def test_starred_is_conjugate_transpose(F4):
    a = F4.matrix("x")
    assert np.array_equal(F4.matrix("x", True), a.conj().T)


def test_eval_monomial_examples(F4):
    A, B = F4.matrix("x"), F4.matrix("y")
    assert np.allclose(eval_monomial(from_word([X, Y]), F4), A @ B, atol=1e-12)
    assert np.allclose(eval_monomial(hadamard([single_edge("x"), single_edge("y")]), F4), A * B, atol=1e-12)
    assert np.allclose(eval_monomial(degree_op(single_edge("x")), F4), np.diag(A.sum(axis=1)), atol=1e-12)
    assert np.allclose(eval_monomial(from_word([X, XS]), F4), A @ A.conj().T, atol=1e-12)


def test_eval_monomial_matches_brute_force(F4):
    rng = random.Random(1)
    for _ in range(40):
        t = random_monomial(rng, max_v=4, max_e=6)
        assert np.allclose(eval_monomial(t, F4), brute_monomial(t, F4), atol=1e-10)


def test_eval_respects_substitution(F4):
    rng = random.Random(2)
    for _ in range(15):
        t = random_monomial(rng, max_v=3, max_e=4)
        a = {v: random_monomial(rng, max_v=3, max_e=3) for v in "xy"}
        inner = MatrixFamily({v: eval_monomial(a[v], F4) for v in "xy"})
        assert np.allclose(eval_monomial(substitute(t, a), F4), eval_monomial(t, inner), rtol=1e-9, atol=1e-9)


def test_trace_examples():
    rng = np.random.default_rng(3)
    assert trace_test_graph(close(from_word([X])), MatrixFamily({"x": np.eye(6)})).value == pytest.approx(1)
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    F = MatrixFamily({"x": A})
    for k in range(1, 5):
        T = StarTestGraph(1, [(0, 0, "x", False)] * k)
        direct = sum(A[i, i] ** k for i in range(5)) / 5
        assert abs(trace_test_graph(T, F).value - direct) < 1e-12


def test_trace_of_close_is_normalized_trace(F4):
    rng = random.Random(4)
    for _ in range(30):
        t = random_monomial(rng)
        lhs = trace_test_graph(close(t), F4).value
        rhs = np.trace(eval_monomial(t, F4)) / F4.N
        assert abs(lhs - rhs) < 1e-10 * max(1, abs(rhs))


def test_trace_matches_brute_force_dense_graphs():
    rng = random.Random(5)
    F = random_family(np.random.default_rng(5), 3)
    for _ in range(30):
        g = random_graph(rng, max_v=5, max_e=10)
        assert abs(trace_test_graph(g, F).value - brute_trace(g, F)) < 1e-9 * max(1, abs(brute_trace(g, F)))


def test_injective_examples():
    F = MatrixFamily({"x": np.ones((3, 3))})
    assert injective_trace(StarTestGraph(2, [(0, 1, "x", False)]), F).value == pytest.approx(2)
    big = StarTestGraph(7, [(i, i + 1, "x", False) for i in range(6)])
    r = injective_trace(big, MatrixFamily({"x": np.ones((5, 5))}))
    assert r.value == 0 and r.flag == "no_injection"


def test_injective_matches_brute_force_and_mobius():
    rng = random.Random(6)
    F = random_family(np.random.default_rng(6), 5)
    for _ in range(25):
        g = random_graph(rng, max_v=4, max_e=6)
        brute = brute_trace(g, F, injective=True)
        e = injective_trace(g, F, method="enumerate").value
        m = injective_trace(g, F, method="mobius").value
        scale = max(1, abs(brute))
        assert abs(e - brute) < 1e-10 * scale and abs(m - brute) < 1e-10 * scale


@pytest.mark.parametrize("N", [4, 5, 6])
def test_trace_is_sum_of_injective_traces_of_quotients(N):
    rng = random.Random(N)
    F = random_family(np.random.default_rng(N), N)
    for _ in range(15):
        g = random_graph(rng, max_v=4, max_e=6)
        total = sum(injective_trace(quotient(g, p), F, method="enumerate").value for p in enumerate_partitions(g.vertex_count))
        tr = trace_test_graph(g, F).value
        assert abs(total - tr) <= 1e-10 * max(1, abs(tr))


def test_exact_rational_path():
    J = np.full((3, 3), Fraction(1, 3), dtype=object)
    F = MatrixFamily({"x": J})
    assert F.exact
    assert trace_test_graph(close(from_word([X, X])), F).value == Fraction(1, 3) * Fraction(1) * 3 * Fraction(1, 3)
    tau0 = injective_trace(StarTestGraph(2, [(0, 1, "x", False)]), F).value
    assert tau0 == Fraction(2, 3) and isinstance(tau0, Fraction)
    assert injective_trace_mobius(StarTestGraph(2, [(0, 1, "x", False)]), F) == Fraction(2, 3)


def test_injective_density():
    rng = random.Random(7)
    N = 5
    F = random_family(np.random.default_rng(7), N)
    for _ in range(15):
        g = random_graph(rng, max_v=4)
        tau0 = injective_trace(g, F).value
        d = injective_density(g, F).value
        n = g.vertex_count
        assert abs(tau0 - math.factorial(N - 1) / math.factorial(N - n) * d) < 1e-10 * max(1, abs(tau0))
    loop = StarTestGraph(1, [(0, 0, "x", False)])
    assert abs(injective_density(loop, F).value - np.trace(F.matrix("x")) / N) < 1e-12
    with pytest.raises(ContractError):
        injective_density(StarTestGraph(6, [(i, i + 1, "x", False) for i in range(5)]), F)


def test_fixed_and_uniform_density_agree_under_permutation_resampling():
    rng = np.random.default_rng(8)
    N = 5
    F = random_family(rng, N)
    T = StarTestGraph(3, [(0, 1, "x", False), (1, 2, "y", False), (2, 0, "x", True)])
    target = injective_density(T, F).value
    vals = np.array([injective_density(T, F.permuted(rng.permutation(N)), mode="fixed_injection").value for _ in range(3000)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - target) < 3 * se + 1e-12


def test_splitting_identity_monte_carlo():
    # T1 is an x-triangle, T2 a y two-cycle, glued at one vertex
    rng = np.random.default_rng(9)
    N = 6
    T1 = StarTestGraph(3, [(0, 1, "x", False), (1, 2, "x", False), (2, 0, "x", False)])
    T2 = StarTestGraph(2, [(0, 1, "y", False), (1, 0, "y", False)])
    T = StarTestGraph(4, list(T1.edges) + [(0, 3, "y", False), (3, 0, "y", False)])
    lhs, a, b = [], [], []
    for _ in range(600):
        F = MatrixFamily({"x": 1 + rng.normal(size=(N, N)), "y": 1 + rng.normal(size=(N, N))})
        lhs.append(injective_trace(T, F).value.real)
        a.append(injective_trace(T1, F).value.real)
        b.append(injective_trace(T2, F).value.real)
    lhs, a, b = map(np.array, (lhs, a, b))
    f = math.factorial
    factor = f(N - 3) * f(N - 2) / (f(N - 4) * f(N - 1))
    rhs = factor * a.mean() * b.mean()
    n = len(lhs)
    sd = math.sqrt(lhs.var(ddof=1) / n + factor**2 * (b.mean() ** 2 * a.var(ddof=1) + a.mean() ** 2 * b.var(ddof=1)) / n)
    assert abs(lhs.mean() - rhs) < 3 * sd


def test_eval_n_graph():
    A = np.random.default_rng(10).normal(size=(4, 4))
    F = MatrixFamily({"x": A})
    loop = NGraphMonomial(StarTestGraph(1, [(0, 0, "x", False)]), [0])
    assert np.allclose(eval_n_graph(loop, F), np.diag(A))
    edge = NGraphMonomial(StarTestGraph(2, [(0, 1, "x", False)]), [0, 1])
    assert np.allclose(eval_n_graph(edge, F), A)
    rep = NGraphMonomial(StarTestGraph(2, [(0, 1, "x", False)]), [0, 0, 1])
    ten = eval_n_graph(rep, F)
    assert ten.shape == (4, 4, 4)
    for i in range(4):
        assert np.allclose(ten[i, i, :], A[i])
    assert np.count_nonzero(ten) == 16
    with pytest.raises(GuardError):
        eval_n_graph(NGraphMonomial(StarTestGraph(1, []), [0] * 5), MatrixFamily({"x": np.eye(30)}))


def test_pairing_nonnegative_and_cauchy_schwarz():
    rng = random.Random(11)
    nrng = np.random.default_rng(11)
    for _ in range(50):
        N = rng.randint(2, 6)
        F = random_family(nrng, N)
        k = rng.randint(1, 3)
        ts = []
        for _ in range(2):
            g = random_graph(rng, max_v=4, max_e=5)
            ts.append(NGraphMonomial(g, [rng.randrange(g.vertex_count) for _ in range(k)]))
        p11, p22, p12 = pairing(ts[0], ts[0], F), pairing(ts[1], ts[1], F), pairing(ts[0], ts[1], F)
        for p in (p11, p22):
            assert abs(p.imag) <= 1e-9 * max(1, abs(p)) and p.real >= -1e-9
        assert abs(p12) ** 2 <= p11.real * p22.real * (1 + 1e-9) + 1e-9
        assert abs(pairing_via_merge(ts[0], ts[1], F) - p12) < 1e-9 * max(1, abs(p12))


def test_permutation_equivariance():
    rng = random.Random(12)
    nrng = np.random.default_rng(12)
    F = random_family(nrng, 5)
    for _ in range(20):
        t = random_monomial(rng)
        assert check_permutation_equivariance(t, F, nrng.permutation(5)) < 1e-12
        assert check_permutation_equivariance(t, F, np.arange(5)) == 0
    had = hadamard([single_edge("x"), single_edge("y")])
    Q, R = np.linalg.qr(nrng.normal(size=(5, 5)) + 1j * nrng.normal(size=(5, 5)))
    assert check_permutation_equivariance(had, F, Q) > 0.1


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_family_containers(tmp_path, suffix):
    F = random_family(np.random.default_rng(13), 4)
    path = str(tmp_path / ("fam" + suffix))
    save_family(F, path)
    G = load_family(path)
    assert G.N == 4 and set(G.entries) == {"x", "y"}
    for k in "xy":
        assert np.array_equal(G.matrix(k), F.matrix(k))


def test_family_container_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope")
    with pytest.raises(ParseError):
        load_family(str(bad))
    csv = tmp_path / "bad.csv"
    csv.write_text("N,2\nvariables,x\nx,0,1,0\n")
    with pytest.raises(ParseError):
        load_family(str(csv))
    F = random_family(np.random.default_rng(0), 3)
    good = tmp_path / "f.bin"
    save_family(F, str(good))
    good.write_bytes(good.read_bytes()[:-1])
    with pytest.raises(ParseError):
        load_family(str(good))
