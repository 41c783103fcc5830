"""Acyclic summary causal graphs with loops and their window-graph unrollings."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Union

from .errors import CyclicGraph, InputError, LagOutOfRange, NoSuchEdge, UnknownVertex

Edge = tuple[str, str]


class LaggedVariable(NamedTuple):
    """A series observed ``lag`` samples before the reference time ``t``."""

    vertex: str
    lag: int

    def __str__(self):
        return f"{self.vertex}@{self.lag}"


@dataclass(frozen=True)
class ASCGL:
    """Summary causal graph: cross edges form a DAG, self-loops kept apart.

    Build instances through :func:`validate_ascgl` (or :meth:`from_dict`);
    the constructor does not check acyclicity.
    """

    vertices: tuple[str, ...]
    edges: frozenset[Edge]
    loops: frozenset[str]

    def __contains__(self, v):
        return v in self._index

    @property
    def _index(self):
        # cached lazily; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_vset"]
        except KeyError:
            vset = frozenset(self.vertices)
            object.__setattr__(self, "_vset", vset)
            return vset

    def _adjacency(self):
        try:
            return self.__dict__["_adj"]
        except KeyError:
            pa = {v: set() for v in self.vertices}
            ch = {v: set() for v in self.vertices}
            for u, v in self.edges:
                pa[v].add(u)
                ch[u].add(v)
            adj = ({v: frozenset(s) for v, s in pa.items()}, {v: frozenset(s) for v, s in ch.items()})
            object.__setattr__(self, "_adj", adj)
            return adj

    def _check(self, v):
        if v not in self:
            raise UnknownVertex(v)

    def parents(self, v: str, include_self: bool = False) -> frozenset[str]:
        self._check(v)
        pa = self._adjacency()[0][v]
        if include_self and v in self.loops:
            return pa | {v}
        return pa

    def children(self, v: str) -> frozenset[str]:
        self._check(v)
        return self._adjacency()[1][v]

    def has_edge(self, cause: str, effect: str) -> bool:
        if cause == effect:
            return cause in self.loops
        return (cause, effect) in self.edges

    def roots(self) -> list[str]:
        return [v for v in self.vertices if not self.parents(v)]

    def descendants(self, v: str) -> set[str]:
        """Vertices reachable from ``v`` along cross edges, ``v`` excluded."""
        self._check(v)
        seen, queue = set(), deque([v])
        while queue:
            for c in self.children(queue.popleft()):
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        return seen

    def ancestors(self, v: str) -> set[str]:
        self._check(v)
        seen, queue = set(), deque([v])
        while queue:
            for p in self.parents(queue.popleft()):
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return seen

    def topological_order(self) -> list[str]:
        ts = TopologicalSorter({v: sorted(self.parents(v)) for v in self.vertices})
        ts.prepare()
        order = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.sorted_edges()],
            "loops": sorted(self.loops),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ASCGL":
        try:
            vertices = obj["vertices"]
        except (KeyError, TypeError):
            raise InputError("graph JSON must be an object with a 'vertices' list") from None
        edges = [tuple(e) for e in obj.get("edges", [])]
        if any(len(e) != 2 for e in edges):
            raise InputError("every graph edge must be a [cause, effect] pair")
        return validate_ascgl(vertices, edges, obj.get("loops", []))


def validate_ascgl(vertices: Iterable[str], edges: Iterable[Edge], loops: Iterable[str] = ()) -> ASCGL:
    """Check a raw vertex/edge/loop description and return an :class:`ASCGL`.

    Self-loops listed among ``edges`` are moved into the loop set. Raises
    :class:`UnknownVertex` for undeclared endpoints and :class:`CyclicGraph`
    when the cross edges contain a directed cycle.
    """
    vertices = list(vertices)
    for v in vertices:
        if not isinstance(v, str) or not v:
            raise ValueError(f"vertex names must be non-empty strings, got {v!r}")
    if len(set(vertices)) != len(vertices):
        raise ValueError("duplicate vertex names")
    vset = set(vertices)
    loop_set = set()
    for v in loops:
        if v not in vset:
            raise UnknownVertex(v)
        loop_set.add(v)
    cross = set()
    for u, v in edges:
        for w in (u, v):
            if w not in vset:
                raise UnknownVertex(w)
        if u == v:
            loop_set.add(u)
        else:
            cross.add((u, v))

    preds = {v: set() for v in vset}
    for u, v in cross:
        preds[v].add(u)
    try:
        tuple(TopologicalSorter(preds).static_order())
    except CycleError as exc:
        cycle = exc.args[1]
        raise CyclicGraph(cycle[::-1]) from None
    return ASCGL(tuple(sorted(vset)), frozenset(cross), frozenset(loop_set))


def parents(graph: ASCGL, v: str, include_self: bool = False) -> frozenset[str]:
    return graph.parents(v, include_self=include_self)


def load_graph(path: Union[str, Path]) -> ASCGL:
    with open(path, encoding="utf-8") as fh:
        return ASCGL.from_dict(json.load(fh))


def save_graph(graph: ASCGL, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class WindowGraph:
    """Finite DAG over (vertex, lag) pairs, lags ``0..gamma_max``."""

    gamma_max: int
    nodes: tuple[LaggedVariable, ...]
    edges: frozenset[tuple[LaggedVariable, LaggedVariable]]

    def parents(self, node: LaggedVariable) -> set[LaggedVariable]:
        return {u for u, v in self.edges if v == node}

    def contract(self) -> ASCGL:
        """Drop lags and deduplicate, recovering a summary graph."""
        vertices = sorted({n.vertex for n in self.nodes})
        pairs = {(u.vertex, v.vertex) for u, v in self.edges}
        return validate_ascgl(vertices, pairs)


LagSpec = Union[int, Mapping[Edge, int]]


def unroll(graph: ASCGL, gamma_max: int, lag_of: LagSpec) -> WindowGraph:
    """Materialise the window graph in which each summary edge carries one lag.

    ``lag_of`` maps ``(cause, effect)`` to a lag; loops are keyed ``(v, v)``.
    An ``int`` applies one lag to every cross edge and ``max(1, lag)`` to
    every loop. Every lag ``0..gamma_max`` gets a node for every vertex.
    """
    if gamma_max < 0:
        raise LagOutOfRange(f"gamma_max must be >= 0, got {gamma_max}")
    if isinstance(lag_of, int):
        uniform = lag_of
        lags = {e: uniform for e in graph.edges}
        lags.update({(v, v): max(1, uniform) for v in graph.loops})
    else:
        lags = dict(lag_of)
        for (u, v) in lags:
            if not graph.has_edge(u, v):
                raise NoSuchEdge(f"lag given for {u}->{v}, which is not an edge of the graph")

    nodes = tuple(LaggedVariable(v, k) for v in graph.vertices for k in range(gamma_max + 1))
    w_edges = set()
    summary = list(graph.sorted_edges()) + [(v, v) for v in sorted(graph.loops)]
    for u, v in summary:
        if (u, v) not in lags:
            raise LagOutOfRange(f"no lag declared for edge {u}->{v}")
        lag = lags[(u, v)]
        lo = 1 if u == v else 0
        if not lo <= lag <= gamma_max:
            raise LagOutOfRange(f"lag {lag} of {u}->{v} outside [{lo}, {gamma_max}]")
        for b in range(gamma_max - lag + 1):
            w_edges.add((LaggedVariable(u, b + lag), LaggedVariable(v, b)))
    return WindowGraph(gamma_max, nodes, frozenset(w_edges))


def weakly_connected_components(graph: ASCGL, keep: Iterable[str]) -> list[frozenset[str]]:
    """Components of the subgraph induced on ``keep``, edge direction ignored.

    Components are returned ordered by their smallest member.
    """
    keep = set(keep)
    for v in keep:
        graph._check(v)
    nbrs = {v: set() for v in keep}
    for u, v in graph.edges:
        if u in keep and v in keep:
            nbrs[u].add(v)
            nbrs[v].add(u)
    comps, seen = [], set()
    for start in sorted(keep):
        if start in seen:
            continue
        comp, queue = {start}, deque([start])
        while queue:
            for w in nbrs[queue.popleft()]:
                if w not in comp:
                    comp.add(w)
                    queue.append(w)
        seen |= comp
        comps.append(frozenset(comp))
    return comps
