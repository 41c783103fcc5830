import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ascgl_rca.anomaly import (AnomalyEpisode, LinkedAnomalousGraph, decompose, find_sub_roots, find_time_defying,
                               load_episode, save_episode)
from ascgl_rca.errors import InvalidEpisode, UnknownVertex
from ascgl_rca.graph import validate_ascgl
from ascgl_rca.separation import d_separated_ascgl

SPLIT_GRAPH = validate_ascgl("ABCDWXYZ", [("A", "B"), ("C", "B"), ("B", "D"), ("C", "D"), ("A", "X"), ("Z", "X"),
                                   ("Z", "W"), ("X", "Y"), ("W", "Y")], "ABCDWXYZ")


def episode(times, length=10):
    return AnomalyEpisode(frozenset(times), times, length)


def test_split_graph_two_lags():
    ep = episode({v: 0 for v in "BCDWXYZ"})
    lags = decompose(SPLIT_GRAPH, ep)
    assert [lag.members for lag in lags] == [frozenset("BCD"), frozenset("WXYZ")]
    assert find_sub_roots(lags[0]) == {"C"}
    assert find_sub_roots(lags[1]) == {"Z"}


def test_singleton():
    lags = decompose(SPLIT_GRAPH, episode({"Y": 3}))
    assert len(lags) == 1 and lags[0].members == {"Y"}
    assert find_sub_roots(lags[0]) == {"Y"}


def test_normal_chain_splits():
    g = validate_ascgl("PNQ", [("P", "N"), ("N", "Q")], "PNQ")
    lags = decompose(g, episode({"P": 0, "Q": 2}))
    assert [lag.members for lag in lags] == [{"P"}, {"Q"}]
    sep, z = d_separated_ascgl(g, {"P"}, {"Q"})
    assert sep and z == {"N"}


def test_collider_descendant_forces_merge():
    # a1 -> k <- a2 and k -> p -> b, a1 -> b: conditioning on p opens the collider k
    g = validate_ascgl(["a1", "a2", "k", "p", "b"],
                       [("a1", "k"), ("a2", "k"), ("k", "p"), ("p", "b"), ("a1", "b")])
    lags = decompose(g, episode({"a1": 0, "a2": 0, "b": 1}))
    assert [lag.members for lag in lags] == [{"a1", "a2", "b"}]


def test_unknown_member():
    with pytest.raises(UnknownVertex):
        decompose(SPLIT_GRAPH, episode({"Q": 0}))


def test_time_defying_examples():
    g = validate_ascgl("AB", [("A", "B")])
    lag = LinkedAnomalousGraph.induced(g, "AB")
    assert find_time_defying(lag, episode({"A": 5, "B": 2})) == {"B"}
    assert find_time_defying(lag, episode({"A": 2, "B": 5})) == set()
    assert find_time_defying(lag, episode({"A": 2, "B": 2})) == set()
    g = validate_ascgl(["X1", "X2", "Y"], [("X1", "Y"), ("X2", "Y")])
    lag = LinkedAnomalousGraph.induced(g, ["X1", "X2", "Y"])
    assert find_time_defying(lag, episode({"X1": 3, "X2": 7, "Y": 5})) == set()
    assert find_time_defying(lag, episode({"X1": 8, "X2": 7, "Y": 5})) == {"Y"}


def test_sub_roots_ignore_loops():
    g = validate_ascgl("AB", [("A", "B")], "AB")
    lag = LinkedAnomalousGraph.induced(g, "AB")
    assert find_sub_roots(lag) == {"A"}


def test_episode_validation():
    with pytest.raises(InvalidEpisode):
        AnomalyEpisode(frozenset("A"), {"A": 0}, 0)
    with pytest.raises(InvalidEpisode):
        AnomalyEpisode(frozenset("AB"), {"A": 0}, 5)
    with pytest.raises(InvalidEpisode):
        AnomalyEpisode(frozenset("A"), {"A": -1}, 5)
    with pytest.raises(InvalidEpisode):
        AnomalyEpisode(frozenset("A"), {"A": 1.5}, 5)


def test_episode_file_roundtrip(tmp_path):
    ep = episode({"A": 0, "B": 3}, 50)
    save_episode(ep, tmp_path / "a.json")
    assert load_episode(tmp_path / "a.json") == ep


def test_multi_interval_rejected(tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"interval_length": 5, "anomalies": [
        {"vertex": "A", "appearance_time": 0}, {"vertex": "A", "appearance_time": 9}]}))
    with pytest.raises(InvalidEpisode, match="more than once"):
        load_episode(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"anomalies": []}))
    with pytest.raises(InvalidEpisode):
        load_episode(path)


@st.composite
def graph_and_anomalies(draw):
    n = draw(st.integers(1, 8))
    names = [f"v{i}" for i in range(n)]
    pairs = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    members = draw(st.sets(st.sampled_from(names), min_size=1))
    times = {v: draw(st.integers(0, 5)) for v in members}
    return validate_ascgl(names, edges, names), episode(times)


@settings(max_examples=150, deadline=None)
@given(graph_and_anomalies())
def test_decomposition_properties(case):
    g, ep = case
    lags = decompose(g, ep)
    union = set()
    for lag in lags:
        assert lag.members and not (union & lag.members)
        union |= lag.members
        roots = find_sub_roots(lag)
        assert roots
        assert not (roots & find_time_defying(lag, ep))
    assert union == ep.members
    for a, b in zip(lags, lags[1:]):
        assert min(a.members) < min(b.members)
    for i in range(len(lags)):
        for j in range(i + 1, len(lags)):
            sep, z = d_separated_ascgl(g, lags[i].members, lags[j].members)
            assert sep and not (z & ep.members)
