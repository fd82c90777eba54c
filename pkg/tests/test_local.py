import json

import numpy as np
import pytest

from traffics.algebra import free_product
from traffics.errors import ContractError, GuardError, TruncationError
from traffics.evaluation import injective_trace
from traffics.graph import StarTestGraph
from traffics.laws import tau0_permutation
from traffics.local import (
    ComponentSampler,
    check_freeprod_consistency,
    estimate_ball_size,
    finite_sampler,
    line_sampler,
    local_free_product,
    percolated_line_sampler,
    rooted_injective_count,
)


def G(n, *edges):
    return StarTestGraph(n, [e if len(e) == 4 else (*e, False) for e in edges])


def test_f2_ball():
    net = local_free_product([line_sampler("a"), line_sampler("b")], 2)
    assert net.vertex_count == 17
    dist = net.distances()
    assert sorted(dist) == [0] + [1] * 4 + [2] * 12
    # 4-regular tree: no cycles, every interior vertex has degree 4
    n_edges = sum(len(es) for es in net.edges.values())
    assert n_edges == net.vertex_count - 1
    adj = net.neighbors()
    assert all(len(adj[v]) == 4 for v in range(net.vertex_count) if dist[v] < 2)


@pytest.mark.parametrize("depth,size", [(0, 1), (1, 5), (2, 17), (3, 53)])
def test_f2_ball_sizes(depth, size):
    assert local_free_product([line_sampler("a"), line_sampler("b")], depth).vertex_count == size
    assert estimate_ball_size([2, 2], depth) == size


def test_single_sampler_is_its_component():
    net = local_free_product([line_sampler("a")], 3)
    assert net.vertex_count == 7
    assert len(net.edges["a"]) == 6


def test_deterministic_independent_of_seed():
    s = [line_sampler("a"), line_sampler("b")]
    assert local_free_product(s, 2, seed=1).canonical_key() == local_free_product(s, 2, seed=99).canonical_key()


def test_guards_and_contracts():
    with pytest.raises(GuardError):
        local_free_product([line_sampler("a")], 5)
    with pytest.raises(ContractError):
        local_free_product([line_sampler("a"), line_sampler("a")], 1)
    with pytest.raises(ContractError):
        local_free_product([line_sampler("a")], -1)


def test_rooted_counts_on_line_and_f2():
    line = local_free_product([line_sampler("a")], 3)
    assert rooted_injective_count(G(2, (0, 1, "a")), 0, line) == 1
    f2 = local_free_product([line_sampler("a"), line_sampler("b")], 3)
    alt = G(4, (0, 1, "a"), (1, 2, "b"), (2, 3, "a"))
    assert rooted_injective_count(alt, 0, f2) == 1
    back = G(3, (0, 1, "a"), (2, 1, "b", True))
    assert rooted_injective_count(back, 0, f2) == 1
    tri = G(3, (0, 1, "a"), (1, 2, "a"), (2, 0, "a"))
    assert rooted_injective_count(tri, 0, f2) == 0
    with pytest.raises(TruncationError):
        rooted_injective_count(G(5, (0, 1, "a"), (1, 2, "a"), (2, 3, "a"), (3, 4, "a")), 0, f2)
    with pytest.raises(ContractError):
        rooted_injective_count(alt, 7, f2)


def test_rooted_count_matches_matrix_injective_trace_on_finite_network():
    # on a finite vertex-transitive network the rooted count equals N * tau0 / N
    n = 5
    cyc = {(k, (k + 1) % n): 1.0 for k in range(n)}
    net = local_free_product([finite_sampler(n, {"a": cyc})], 3)
    F = net.to_matrix_family()
    for T in [G(2, (0, 1, "a")), G(3, (0, 1, "a"), (1, 2, "a")), G(2, (0, 1, "a"), (1, 0, "a"))]:
        assert abs(rooted_injective_count(T, 0, net) - injective_trace(T, F).value) < 1e-12


def test_directed_lines_match_permutation_free_product():
    net = local_free_product([line_sampler("a"), line_sampler("b")], 3)
    fp = free_product({0: tau0_permutation(), 1: tau0_permutation()}, {"a": 0, "b": 1})
    graphs = [
        G(2, (0, 1, "a")),
        G(3, (0, 1, "a"), (1, 2, "b")),
        G(3, (0, 1, "a"), (2, 1, "b", True)),
        G(4, (0, 1, "a"), (1, 2, "b"), (2, 3, "a")),
        G(4, (0, 1, "b"), (1, 2, "b"), (3, 2, "a", True)),
        G(3, (0, 1, "a"), (1, 2, "a")),
        G(2, (0, 1, "a"), (1, 0, "b")),
        G(3, (0, 1, "a"), (1, 2, "b"), (2, 0, "a")),
    ]
    for T in graphs:
        assert rooted_injective_count(T, 0, net) == fp(T), T


def test_truncation_consistency():
    s = [percolated_line_sampler("a", 0.6), percolated_line_sampler("b", 0.6), line_sampler("c")]
    for seed in range(5):
        deep = local_free_product(s, 3, seed=seed)
        shallow = local_free_product(s, 2, seed=seed)
        assert deep.ball(2).canonical_key() == shallow.canonical_key()


def test_percolated_sampler_monotone():
    s = percolated_line_sampler("a", 0.5)
    ss = np.random.SeedSequence(3)
    small = s.draw(np.random.SeedSequence(3), 2)
    big = s.draw(ss, 5)
    assert set(small[0]) <= set(big[0])
    assert set(small[1]["a"]) <= set(big[1]["a"])


def test_finite_sampler_keeps_root_component():
    s = finite_sampler(4, {"a": {(0, 1): 1.0, (2, 3): 1.0}})
    labels, edges, root = s.draw(np.random.SeedSequence(0), 3)
    assert sorted(labels) == [0, 1] and edges["a"] == {(0, 1): 1.0}


def test_network_json_and_matrix_family():
    net = local_free_product([line_sampler("a"), line_sampler("b")], 1)
    data = json.loads(net.to_json())
    assert len(data["vertices"]) == 5 and data["root"] == 0
    assert sum(len(v) for v in data["edges"].values()) == 4
    F = net.to_matrix_family()
    assert F.N == 5 and F.matrix("a").sum() == 2


def test_freeprod_consistency_deterministic_and_percolated():
    lines = [line_sampler("a"), line_sampler("b")]
    Ts = [(G(2, (0, 1, "a")), 0), (G(3, (0, 1, "a"), (1, 2, "b")), 0), (G(2, (0, 1, "a"), (1, 0, "b")), 0)]
    rows = check_freeprod_consistency(lines, Ts, depth=3, mc_samples=2)
    assert all(r.agrees and r.mean == r.prediction for r in rows)
    perc = [percolated_line_sampler("a", 0.5), percolated_line_sampler("b", 0.7)]
    rows = check_freeprod_consistency(perc, Ts + [(G(3, (0, 1, "a"), (1, 2, "a")), 0)], depth=3, mc_samples=200, seed=11)
    assert all(r.agrees for r in rows)
    # non-free-product graph: mean 0
    assert rows[2].mean == 0 and rows[2].prediction == 0
    # predictions approximate q^{#edges}
    assert abs(rows[0].mean - 0.5) < 0.15 and abs(rows[1].mean - 0.35) < 0.15
