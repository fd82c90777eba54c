import json
import random

import pytest

from helpers import random_graph
from traffics.dsl import graph_from_json, graph_to_json, load_graph, parse_graph
from traffics.errors import ParseError
from traffics.graph import GraphMonomial, NGraphMonomial, StarTestGraph, canonicalize, to_dsl


def test_parse_example():
    g = parse_graph("graph { v = 3; e = 0->1:x, 1->2:x*, 2->0:y; in = 0; out = 2 }")
    assert isinstance(g, GraphMonomial)
    assert (g.input, g.output, g.vertex_count) == (0, 2, 3)
    assert sorted((e.src, e.dst, e.var, e.star) for e in g.edges) == [(0, 1, "x", False), (1, 2, "x", True), (2, 0, "y", False)]


def test_parse_kinds():
    assert isinstance(parse_graph("graph { v = 1 }"), StarTestGraph)
    t = parse_graph("graph { v = 2; e = 0->1:foo_1; roots = 1, 1, 0 }")
    assert isinstance(t, NGraphMonomial) and t.roots == (1, 1, 0)
    multi = parse_graph("graph {\n  v = 2;\n  e = 0->1:x,\n      1->0:x*\n}")
    assert len(multi.edges) == 2


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("graph { v = 2; e = 0->1:x, 1->2:y }", 1, 28),
        ("graph {\n v = 2;\n e = 0-1:x }", 3, 7),
        ("graph { v = 2; e = 0->1:x; in = 0 }", 1, 28),
        ("graph { v = 2 }", None, None),
        ("graph { v = 3; e = 0->1:x }", None, None),
        ("graph { v = 2; e = 0->1:x; foo = 1 }", 1, 28),
        ("graph { v = 2; e = 0->1:x $ }", 1, 27),
        ("graph { v = 2; e = 0->1:x", None, None),
    ],
)
def test_parse_errors_have_location(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_graph(text)
    err = info.value
    assert err.line is not None and err.column is not None
    if line is not None:
        assert (err.line, err.column) == (line, col)
    assert f"line {err.line}, column {err.column}" in str(err)


def test_round_trip_dsl_and_json():
    rng = random.Random(1)
    for _ in range(40):
        g = random_graph(rng, max_v=5, max_e=7)
        r = rng.random()
        if r < 0.3:
            g = GraphMonomial(g, rng.randrange(g.vertex_count), rng.randrange(g.vertex_count))
        elif r < 0.6:
            g = NGraphMonomial(g, [rng.randrange(g.vertex_count) for _ in range(rng.randint(1, 3))])
        assert parse_graph(to_dsl(g)) == g
        assert graph_from_json(json.dumps(graph_to_json(g))) == g
        assert load_graph(to_dsl(g)) == g
        assert load_graph(graph_to_json(g)) == g
        assert canonicalize(load_graph(json.dumps(graph_to_json(g)))) == canonicalize(g)


def test_json_errors():
    with pytest.raises(ParseError) as info:
        graph_from_json('{"vertex_count": 2,\n "edges": [}')
    assert info.value.line == 2
    with pytest.raises(ParseError):
        graph_from_json({"edges": []})
    with pytest.raises(ParseError):
        graph_from_json({"vertex_count": 2, "edges": [{"src": 0, "dst": 1}]})
    with pytest.raises(ParseError):
        graph_from_json({"vertex_count": 2, "edges": []})
