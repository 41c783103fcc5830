"""d-separation on DAGs and the parent-set criterion for summary graphs with loops."""

from __future__ import annotations

from collections import defaultdict, deque
from typing import Hashable, Iterable

from .errors import OverlappingSets, UnknownVertex
from .graph import ASCGL


def _as_dag(dag):
    """Return (nodes, parents, children) for anything exposing ``nodes`` and ``edges``.

    Works for :class:`ASCGL` (loops are not edges), :class:`WindowGraph` and
    ``networkx.DiGraph``.
    """
    nodes = set(dag.vertices) if isinstance(dag, ASCGL) else set(dag.nodes)
    pa, ch = defaultdict(set), defaultdict(set)
    for u, v in dag.edges:
        if u == v:
            raise ValueError(f"self-loop on {u!r}; d-separation needs a DAG")
        pa[v].add(u)
        ch[u].add(v)
    return nodes, pa, ch


def d_separated_dag(dag, x_set: Iterable[Hashable], y_set: Iterable[Hashable],
                    z_set: Iterable[Hashable] = ()) -> bool:
    """Exact d-separation test by reachability of active trails.

    Trails are explored as (node, direction) states: "up" when the node was
    entered from one of its children, "down" when entered from a parent. A
    collider is passable only when it, or one of its descendants, is in
    ``z_set``.
    """
    nodes, pa, ch = _as_dag(dag)
    xs, ys, zs = set(x_set), set(y_set), set(z_set)
    for s in (xs, ys, zs):
        for n in s:
            if n not in nodes:
                raise UnknownVertex(n)
    if xs & ys or xs & zs or ys & zs:
        raise OverlappingSets("x, y and z sets must be pairwise disjoint")
    if not xs or not ys:
        return True

    # nodes with a descendant (or themselves) in z
    opens = set()
    stack = list(zs)
    while stack:
        n = stack.pop()
        if n not in opens:
            opens.add(n)
            stack.extend(pa[n])

    seen = set()
    queue = deque((x, "up") for x in xs)
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in seen:
            continue
        seen.add((node, direction))
        if node in ys:
            return False
        if direction == "up":
            if node in zs:
                continue
            queue.extend((p, "up") for p in pa[node])
            queue.extend((c, "down") for c in ch[node])
        else:
            if node not in zs:
                queue.extend((c, "down") for c in ch[node])
            if node in opens:
                queue.extend((p, "up") for p in pa[node])
    return True


def canonical_separating_set(graph: ASCGL, x_set: Iterable[str], y_set: Iterable[str]) -> frozenset[str]:
    """Cross-edge parents of ``x_set`` and ``y_set``, minus both sets."""
    xs, ys = set(x_set), set(y_set)
    z = set()
    for v in xs | ys:
        z |= graph.parents(v)
    return frozenset(z - xs - ys)


def d_separated_ascgl(graph: ASCGL, x_set: Iterable[str], y_set: Iterable[str]) -> tuple[bool, frozenset[str]]:
    """Sufficient test for d-separation in a summary graph with loops.

    The conditioning set is fixed to the parents of both sides. On the
    loopless projection this set is tested with :func:`d_separated_dag`;
    when it separates, the same vertices (read over all lags) together with
    the own past of looped members separate the two sides in every
    compatible window graph. ``False`` means "not separated by this set",
    not necessarily d-connected for every set.
    """
    xs, ys = set(x_set), set(y_set)
    for v in xs | ys:
        if v not in graph:
            raise UnknownVertex(v)
    if xs & ys:
        raise OverlappingSets("x and y sets overlap")
    z = canonical_separating_set(graph, xs, ys)
    return d_separated_dag(graph, xs, ys, z), z
