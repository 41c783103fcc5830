"""Anomaly episodes, their split into linked anomalous graphs, and graph-only root causes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Union

from .errors import InvalidEpisode, UnknownVertex
from .graph import ASCGL, Edge, weakly_connected_components
from .separation import d_separated_ascgl


@dataclass(frozen=True)
class AnomalyEpisode:
    """One collective anomaly episode.

    ``appearance_time`` holds sample indices counted from the start of the
    anomalous regime; every member shares ``interval_length``.
    """

    members: frozenset[str]
    appearance_time: Mapping[str, int] = field(hash=False)
    interval_length: int

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        object.__setattr__(self, "appearance_time", dict(self.appearance_time))
        if not isinstance(self.interval_length, int) or self.interval_length <= 0:
            raise InvalidEpisode(f"interval_length must be a positive integer, got {self.interval_length!r}")
        missing = self.members - set(self.appearance_time)
        if missing:
            raise InvalidEpisode(f"no appearance time for {sorted(missing)}")
        extra = set(self.appearance_time) - self.members
        if extra:
            raise InvalidEpisode(f"appearance time given for non-members {sorted(extra)}")
        for v, t in self.appearance_time.items():
            if not isinstance(t, int) or isinstance(t, bool) or t < 0:
                raise InvalidEpisode(f"appearance time of {v!r} must be a non-negative integer, got {t!r}")

    def check_against(self, graph: ASCGL) -> None:
        for v in sorted(self.members):
            if v not in graph:
                raise UnknownVertex(v)

    def restrict(self, members) -> "AnomalyEpisode":
        members = frozenset(members)
        return AnomalyEpisode(members, {v: self.appearance_time[v] for v in members}, self.interval_length)

    def to_dict(self) -> dict:
        return {
            "interval_length": self.interval_length,
            "anomalies": [{"vertex": v, "appearance_time": self.appearance_time[v]} for v in sorted(self.members)],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "AnomalyEpisode":
        try:
            length = obj["interval_length"]
            entries = obj["anomalies"]
        except (KeyError, TypeError):
            raise InvalidEpisode("anomaly file needs 'interval_length' and 'anomalies'") from None
        times = {}
        for entry in entries:
            try:
                v, t = entry["vertex"], entry["appearance_time"]
            except (KeyError, TypeError):
                raise InvalidEpisode(f"malformed anomaly entry {entry!r}") from None
            if v in times:
                # one interval per vertex per episode
                raise InvalidEpisode(f"vertex {v!r} listed more than once; multi-interval anomalies are not supported")
            times[v] = t
        return cls(frozenset(times), times, length)


def load_episode(path: Union[str, Path]) -> AnomalyEpisode:
    with open(path, encoding="utf-8") as fh:
        return AnomalyEpisode.from_dict(json.load(fh))


def save_episode(episode: AnomalyEpisode, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(episode.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LinkedAnomalousGraph:
    members: frozenset[str]
    induced_edges: frozenset[Edge]

    def parents_within(self, v: str) -> set[str]:
        return {u for u, w in self.induced_edges if w == v}

    @classmethod
    def induced(cls, graph: ASCGL, members) -> "LinkedAnomalousGraph":
        members = frozenset(members)
        return cls(members, frozenset((u, v) for u, v in graph.edges if u in members and v in members))


def decompose(graph: ASCGL, episode: AnomalyEpisode) -> list[LinkedAnomalousGraph]:
    """Split the anomalous vertices into linked anomalous graphs.

    Starts from the weakly connected components of the subgraph induced on
    the anomalous vertices, then merges any two groups that the parent-set
    criterion cannot separate (this happens when a normal collider has a
    descendant among the parents of an anomalous vertex). Groups come out
    ordered by their smallest member.
    """
    episode.check_against(graph)
    groups = [set(c) for c in weakly_connected_components(graph, episode.members)]
    merged = True
    while merged:
        merged = False
        for i, j in combinations(range(len(groups)), 2):
            separated, _ = d_separated_ascgl(graph, groups[i], groups[j])
            if not separated:
                groups[i] |= groups.pop(j)
                merged = True
                break
    groups.sort(key=min)
    return [LinkedAnomalousGraph.induced(graph, g) for g in groups]


def find_sub_roots(lag: LinkedAnomalousGraph) -> frozenset[str]:
    """Members without a parent inside the linked anomalous graph."""
    has_parent = {v for _, v in lag.induced_edges}
    return frozenset(lag.members - has_parent)


def find_time_defying(lag: LinkedAnomalousGraph, episode: AnomalyEpisode) -> frozenset[str]:
    """Non-sub-root members whose anomaly strictly precedes that of every in-group parent."""
    t = episode.appearance_time
    out = set()
    for y in lag.members:
        pa = lag.parents_within(y)
        if pa and all(t[y] < t[x] for x in pa):
            out.add(y)
    return frozenset(out)
