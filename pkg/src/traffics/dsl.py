"""Text and JSON formats for graphs.

Text form::

    graph { v = 3; e = 0->1:x, 1->2:x*, 2->0:y; in = 0; out = 2 }

``in``/``out`` make a monomial, ``roots = 0, 2`` an n-graph monomial, and
neither gives a test graph. The JSON mirror has keys ``vertex_count``,
``edges`` (objects with ``src``, ``dst``, ``var``, ``star``) and optionally
``input``, ``output`` or ``roots``.
"""

from __future__ import annotations

import json
import re

from .errors import ContractError, ParseError
from .graph import Edge, GraphMonomial, NGraphMonomial, StarTestGraph, _parts

_TOKEN = re.compile(r"\s*(?:(->)|([A-Za-z_][A-Za-z0-9_]*)|(\d+)|([{};=,:*]))")


def _tokenize(text: str):
    pos = 0
    out = []
    while True:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            skipped = len(rest) - len(rest.lstrip())
            line, col = _where(text, pos + skipped)
            raise ParseError(f"unexpected character {rest.lstrip()[0]!r}", line, col)
        start = m.start(m.lastindex)
        out.append((m.group(m.lastindex), m.lastindex, start))
        pos = m.end()
    return out


def _where(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def _fail(self, msg: str):
        if self.i < len(self.toks):
            line, col = _where(self.text, self.toks[self.i][2])
            raise ParseError(f"{msg}, found {self.toks[self.i][0]!r}", line, col)
        line, col = _where(self.text, len(self.text))
        raise ParseError(f"{msg}, found end of input", line, col)

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def expect(self, value: str):
        if self.peek() != value:
            self._fail(f"expected {value!r}")
        self.i += 1

    def ident(self) -> str:
        if self.i >= len(self.toks) or self.toks[self.i][1] != 2:
            self._fail("expected identifier")
        self.i += 1
        return self.toks[self.i - 1][0]

    def number(self) -> int:
        if self.i >= len(self.toks) or self.toks[self.i][1] != 3:
            self._fail("expected integer")
        self.i += 1
        return int(self.toks[self.i - 1][0])

    def pos(self):
        tok = self.toks[min(self.i, len(self.toks) - 1)]
        return _where(self.text, tok[2])

    def parse(self):
        self.expect("graph")
        self.expect("{")
        fields: dict = {}
        while self.peek() != "}":
            line, col = self.pos()
            key = self.ident()
            if key in fields:
                raise ParseError(f"duplicate field {key!r}", line, col)
            self.expect("=")
            if key == "v":
                fields[key] = (self.number(), line, col)
            elif key in ("in", "out"):
                fields[key] = (self.number(), line, col)
            elif key == "e":
                fields[key] = (self.edges(), line, col)
            elif key == "roots":
                roots = [self.number()]
                while self.peek() == ",":
                    self.i += 1
                    roots.append(self.number())
                fields[key] = (roots, line, col)
            else:
                raise ParseError(f"unknown field {key!r}", line, col)
            if self.peek() == ";":
                self.i += 1
            elif self.peek() != "}":
                self._fail("expected ';' or '}'")
        self.expect("}")
        if self.i != len(self.toks):
            self._fail("trailing input after graph")
        return fields

    def edges(self):
        out = []
        if self.peek() in (";", "}"):
            return out
        while True:
            line, col = self.pos()
            s = self.number()
            self.expect("->")
            d = self.number()
            self.expect(":")
            var = self.ident()
            star = False
            if self.peek() == "*":
                self.i += 1
                star = True
            out.append((Edge(s, d, var, star), line, col))
            if self.peek() != ",":
                return out
            self.i += 1


def _build(vertex_count, edges, input=None, output=None, roots=None, where=lambda k: (None, None)):
    try:
        graph = StarTestGraph(vertex_count, edges)
    except ContractError as exc:
        raise ParseError(str(exc), *where("v")) from None
    if (input is None) != (output is None):
        raise ParseError("'in' and 'out' must be given together", *where("in" if input is not None else "out"))
    if input is not None and roots is not None:
        raise ParseError("a graph has either in/out or roots, not both", *where("roots"))
    try:
        if input is not None:
            return GraphMonomial(graph, input, output)
        if roots is not None:
            return NGraphMonomial(graph, roots)
    except ContractError as exc:
        raise ParseError(str(exc), *where("in" if input is not None else "roots")) from None
    return graph


def parse_graph(text: str):
    """Parse the text form into a StarTestGraph, GraphMonomial or NGraphMonomial.

    Raises
    ------
    ParseError
        With line and column of the offending token.
    """
    fields = _Parser(text).parse()
    if "v" not in fields:
        raise ParseError("missing field 'v'", 1, 1)
    n = fields["v"][0]
    edges = [e for e, _, _ in fields.get("e", ([], 0, 0))[0]]
    for e, line, col in fields.get("e", ([], 0, 0))[0]:
        if not (e.src < n and e.dst < n):
            raise ParseError(f"edge {e.src}->{e.dst} refers to a vertex >= v={n}", line, col)

    def where(key):
        return fields[key][1:] if key in fields else (None, None)

    get = lambda k: fields[k][0] if k in fields else None  # noqa: E731
    return _build(n, edges, get("in"), get("out"), get("roots"), where)


def graph_from_json(obj):
    """Build a graph from the JSON mirror (dict or JSON string)."""
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(obj, dict) or "vertex_count" not in obj:
        raise ParseError("graph JSON needs a 'vertex_count' field")
    try:
        edges = [Edge(int(e["src"]), int(e["dst"]), str(e["var"]), bool(e.get("star", False))) for e in obj.get("edges", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad edge entry: {exc}") from None
    return _build(int(obj["vertex_count"]), edges, obj.get("input"), obj.get("output"), obj.get("roots"))


def graph_to_json(g) -> dict:
    kind, graph, roots = _parts(g)
    out = {
        "vertex_count": graph.vertex_count,
        "edges": [{"src": e.src, "dst": e.dst, "var": e.var, "star": e.star} for e in graph.edges],
    }
    if kind == "mono":
        out["input"], out["output"] = g.input, g.output
    elif kind == "ngraph":
        out["roots"] = list(roots)
    return out


def load_graph(spec):
    """Accept DSL text, a JSON string or a JSON-like dict."""
    if isinstance(spec, dict):
        return graph_from_json(spec)
    s = spec.strip()
    if s.startswith("{"):
        return graph_from_json(s)
    return parse_graph(s)
