"""Synthetic benchmark: random graphs, linear lagged SCM data, interventions, F1 scoring."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .anomaly import AnomalyEpisode
from .dataset import ANOMALOUS, NORMAL, RegimeDataset
from .engine import EngineConfig, RootCauseReport, easy_rca
from .errors import GenerationFailed, NoParents, WindowOutOfRange
from .graph import ASCGL, Edge, validate_ascgl

log = logging.getLogger(__name__)

STRUCTURAL = "structural"
PARAMETRIC = "parametric"
_KIND_CODE = {STRUCTURAL: 0, PARAMETRIC: 1}


@dataclass(frozen=True)
class SimConfig:
    n_vertices: int = 6
    degree_min: int = 4
    degree_max: int = 5
    n_graphs: int = 30
    edge_lag: int = 1
    noise_scale: float = 0.1
    coeff_low: float = 0.1
    coeff_high: float = 1.0
    anomaly_sizes: tuple[int, ...] = (100, 200, 500, 1000, 2000)
    seed: int = 0
    edge_prob: float = 0.5
    max_tries: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "anomaly_sizes", tuple(int(s) for s in self.anomaly_sizes))
        if any(s <= 0 for s in self.anomaly_sizes):
            raise ValueError("anomaly sizes must be positive")
        if not 0 < self.coeff_low <= self.coeff_high:
            raise ValueError("need 0 < coeff_low <= coeff_high")
        if self.n_graphs <= 0 or self.n_vertices <= 0:
            raise ValueError("n_graphs and n_vertices must be positive")
        if self.edge_lag < 0:
            raise ValueError("edge_lag must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    intervened: frozenset[str] = frozenset()
    intervention_type: Mapping[str, str] = field(default_factory=dict, hash=False)
    start_times: Mapping[str, int] = field(default_factory=dict, hash=False)

    def __or__(self, other: "GroundTruth") -> "GroundTruth":
        return GroundTruth(self.intervened | other.intervened,
                           {**self.intervention_type, **other.intervention_type},
                           {**self.start_times, **other.start_times})

    def to_dict(self) -> dict:
        return {"interventions": [{"vertex": v, "type": self.intervention_type[v], "start": self.start_times[v]}
                                  for v in sorted(self.intervened)]}


def random_ascgl(cfg: SimConfig, rng: np.random.Generator) -> ASCGL:
    """Random looped DAG with a single root and maximal total degree in range.

    Vertices are visited in a random order; each one after the first draws
    its parents among the earlier ones (at least one), so the first is the
    only root.
    """
    n = cfg.n_vertices
    if n < 2:
        raise GenerationFailed("need at least two vertices")
    if cfg.degree_max < 1 or cfg.degree_min > cfg.degree_max or cfg.degree_min > n - 1:
        raise GenerationFailed(f"no graph on {n} vertices has maximal degree in [{cfg.degree_min}, {cfg.degree_max}]")
    names = [f"V{i}" for i in range(n)]
    for _ in range(cfg.max_tries):
        order = [names[i] for i in rng.permutation(n)]
        edges = set()
        for i in range(1, n):
            picks = [j for j in range(i) if rng.random() < cfg.edge_prob]
            if not picks:
                picks = [int(rng.integers(i))]
            edges.update((order[j], order[i]) for j in picks)
        deg = Counter(v for e in edges for v in e)
        if cfg.degree_min <= max(deg.values()) <= cfg.degree_max:
            return validate_ascgl(names, edges, names)
    raise GenerationFailed(f"no admissible graph after {cfg.max_tries} attempts")


def draw_coefficients(graph: ASCGL, rng: np.random.Generator, low: float = 0.1, high: float = 1.0) -> dict[Edge, float]:
    """One coefficient per cross edge and per loop (keyed ``(v, v)``), uniform on [low, high)."""
    keys = graph.sorted_edges() + [(v, v) for v in sorted(graph.loops)]
    return {k: float(rng.uniform(low, high)) for k in keys}


@dataclass(frozen=True)
class LinearSCM:
    """``v_t = sum(a * u_{t-lag}) + noise_scale * N(0, 1)`` over the parents of ``v``.

    Cross edges use ``edge_lag``; loops always use lag 1.
    """

    graph: ASCGL
    coeffs: Mapping[Edge, float] = field(hash=False)
    edge_lag: int = 1
    noise_scale: float = 0.1

    @property
    def max_lag(self) -> int:
        return max(1, self.edge_lag)

    def lag_matrices(self, overrides: Optional[Mapping[Edge, float]] = None) -> np.ndarray:
        idx = {v: i for i, v in enumerate(self.graph.vertices)}
        n = len(idx)
        a = np.zeros((self.max_lag + 1, n, n))
        coeffs = dict(self.coeffs)
        if overrides:
            coeffs.update(overrides)
        for (u, v), c in coeffs.items():
            lag = 1 if u == v else self.edge_lag
            a[lag, idx[v], idx[u]] = c
        return a


@dataclass(frozen=True)
class _Intervention:
    vertex: str
    kind: str
    start: int  # absolute row, burn-in included
    size: int
    values: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None  # lag matrices row block, parametric only


@dataclass(frozen=True, eq=False)
class Simulation:
    """Simulated series with the innovations that produced them.

    Keeping the innovations lets interventions re-run the mechanism for the
    affected vertices while every other sample stays bitwise identical.
    """

    scm: LinearSCM
    values: np.ndarray
    noise: np.ndarray
    burn_in: int
    interventions: tuple[_Intervention, ...] = ()

    @property
    def data(self) -> RegimeDataset:
        return RegimeDataset(self.scm.graph.vertices, self.values[self.burn_in:])

    def __len__(self):
        return self.values.shape[0] - self.burn_in


def _forward(scm: LinearSCM, base: np.ndarray, noise: np.ndarray, start: int, affected: Sequence[str],
             interventions: Sequence[_Intervention]) -> np.ndarray:
    graph = scm.graph
    idx = {v: i for i, v in enumerate(graph.vertices)}
    a = scm.lag_matrices()
    k_max = a.shape[0] - 1
    values = base.copy()
    aff = np.zeros(len(idx), dtype=bool)
    aff[[idx[v] for v in affected]] = True
    keep = ~aff
    topo = [idx[v] for v in graph.topological_order()]
    has_lag0 = bool(a[0].any())
    active = [iv for iv in interventions if aff[idx[iv.vertex]]]

    for t in range(start, values.shape[0]):
        acc = noise[t].copy()
        for k in range(1, k_max + 1):
            if t - k >= 0:
                acc += a[k] @ values[t - k]
        fixed, row0 = {}, {}
        for iv in active:
            if not iv.start <= t < iv.start + iv.size:
                continue
            i = idx[iv.vertex]
            if iv.kind == STRUCTURAL:
                fixed[i] = iv.values[t - iv.start]
            else:
                acc[i] = noise[t, i] + sum(iv.rows[k] @ values[t - k] for k in range(1, k_max + 1) if t - k >= 0)
                row0[i] = iv.rows[0]
        if has_lag0:
            for i in topo:
                if keep[i]:
                    acc[i] = base[t, i]
                elif i in fixed:
                    acc[i] = fixed[i]
                else:
                    acc[i] += row0.get(i, a[0, i]) @ acc
        else:
            acc[keep] = base[t, keep]
            for i, val in fixed.items():
                acc[i] = val
        values[t] = acc
    return values


def simulate_scm(graph: ASCGL, length: int, coeffs: Mapping[Edge, float], rng: np.random.Generator,
                 edge_lag: int = 1, noise_scale: float = 0.1, burn_in: int = 150) -> Simulation:
    """Simulate ``length`` samples after discarding ``burn_in`` warm-up samples."""
    scm = LinearSCM(graph, dict(coeffs), edge_lag, noise_scale)
    total = length + burn_in
    noise = noise_scale * rng.standard_normal((total, len(graph.vertices)))
    base = np.zeros_like(noise)
    k = scm.max_lag
    base[:k] = noise[:k]
    values = _forward(scm, base, noise, k, graph.vertices, ())
    return Simulation(scm, values, noise, burn_in)


def _check_window(sim: Simulation, start: int, size: int) -> None:
    if size < 0 or start < 0 or start + size > len(sim):
        raise WindowOutOfRange(f"window [{start}, {start + size}) outside [0, {len(sim)})")


def _apply(sim: Simulation, iv: _Intervention) -> Simulation:
    graph = sim.scm.graph
    affected = {iv.vertex} | graph.descendants(iv.vertex)
    ivs = sim.interventions + (iv,)
    values = _forward(sim.scm, sim.values, sim.noise, iv.start, sorted(affected), ivs)
    return replace(sim, values=values, interventions=ivs)


def inject_structural(sim: Simulation, vertex: str, start: int, size: int, rng: np.random.Generator,
                      rate: float = 2.0) -> tuple[Simulation, GroundTruth]:
    """Replace ``vertex`` on ``[start, start+size)`` by i.i.d. exponential draws and propagate.

    ``rate`` is the exponential rate (mean ``1 / rate``).
    """
    _check_window(sim, start, size)
    if vertex not in sim.scm.graph:
        raise WindowOutOfRange(f"unknown vertex {vertex!r}")
    if size == 0:
        return sim, GroundTruth()
    draws = rng.exponential(1.0 / rate, size)
    iv = _Intervention(vertex, STRUCTURAL, start + sim.burn_in, size, values=draws)
    return _apply(sim, iv), GroundTruth(frozenset({vertex}), {vertex: STRUCTURAL}, {vertex: start})


def inject_parametric(sim: Simulation, vertex: str, start: int, size: int, rng: np.random.Generator,
                      low: float = 0.1, high: float = 1.0,
                      coeffs: Optional[Mapping[Edge, float]] = None) -> tuple[Simulation, GroundTruth]:
    """Regenerate ``vertex`` on the window with fresh coefficients for all its incoming edges.

    New coefficients are drawn uniformly on ``[low, high)``; entries of
    ``coeffs`` (keyed ``(parent, vertex)``) override the draws.
    """
    _check_window(sim, start, size)
    graph = sim.scm.graph
    incoming = sorted((u, vertex) for u in graph.parents(vertex, include_self=True))
    if not incoming:
        raise NoParents(f"{vertex!r} has no parents to re-weight")
    if size == 0:
        return sim, GroundTruth()
    new = {e: float(rng.uniform(low, high)) for e in incoming}
    if coeffs:
        for e in coeffs:
            if e not in new:
                raise NoParents(f"{e[0]}->{e[1]} is not an incoming edge of {vertex!r}")
        new.update(coeffs)
    i = graph.vertices.index(vertex)
    rows = sim.scm.lag_matrices(new)[:, i, :]
    iv = _Intervention(vertex, PARAMETRIC, start + sim.burn_in, size, rows=rows)
    return _apply(sim, iv), GroundTruth(frozenset({vertex}), {vertex: PARAMETRIC}, {vertex: start})


def lag_distances(graph: ASCGL, source: str, edge_lag: int = 1) -> dict[str, int]:
    """Shortest propagation delay from ``source`` to each of its descendants."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for c in sorted(graph.children(u)):
            if c not in dist:
                dist[c] = dist[u] + 1
                queue.append(c)
    return {v: d * edge_lag for v, d in dist.items()}


def episode_from_truth(graph: ASCGL, truth: GroundTruth, regime_start: int, interval_length: int,
                       edge_lag: int = 1) -> AnomalyEpisode:
    """Anomalous vertices and appearance times implied by the interventions."""
    times = {}
    for u in truth.intervened:
        for v, d in lag_distances(graph, u, edge_lag).items():
            t = truth.start_times[u] - regime_start + d
            times[v] = min(times.get(v, t), t)
    return AnomalyEpisode(frozenset(times), {v: max(0, t) for v, t in times.items()}, interval_length)


def f1_score(predicted, truth) -> float:
    """Harmonic mean of precision and recall; 1.0 when both sets are empty."""
    predicted, truth = set(predicted), set(truth)
    if not predicted and not truth:
        return 1.0
    hits = len(predicted & truth)
    if hits == 0:
        return 0.0
    precision, recall = hits / len(predicted), hits / len(truth)
    return 2 * precision * recall / (precision + recall)


def score_report(report: RootCauseReport, truth: GroundTruth) -> float:
    """F1 on the root causes that are not read off the graph or the timing alone."""
    graph_only = report.sub_roots | report.time_defying
    return f1_score(report.root_causes - graph_only, truth.intervened - graph_only)


@dataclass(frozen=True)
class TrialInputs:
    graph: ASCGL
    normal: RegimeDataset
    anomalous: RegimeDataset
    episode: AnomalyEpisode
    truth: GroundTruth


def make_trial(cfg: SimConfig, graph_index: int, size: int, kind: str, n_chunks: int = 10,
               graph: Optional[ASCGL] = None) -> TrialInputs:
    """Inputs of one benchmark trial.

    The graph, its coefficients and the non-root target depend only on
    ``(cfg.seed, graph_index)``, so every anomaly size and intervention type
    reuses them. The root is replaced by exponential draws from the start of
    the anomalous regime; the target is intervened on from the moment the
    root's anomaly reaches it.
    """
    if kind not in _KIND_CODE:
        raise ValueError(f"unknown intervention type {kind!r}")
    grng = np.random.default_rng([cfg.seed, graph_index])
    if graph is None:
        graph = random_ascgl(cfg, grng)
    roots = graph.roots()
    if len(roots) != 1:
        raise GenerationFailed(f"trial graphs need exactly one root, found {roots}")
    root = roots[0]
    coeffs = draw_coefficients(graph, grng, cfg.coeff_low, cfg.coeff_high)
    others = [v for v in graph.vertices if v != root]
    target = others[int(grng.integers(len(others)))]

    drng = np.random.default_rng([cfg.seed, graph_index, size, _KIND_CODE[kind]])
    n_normal = n_chunks * size
    sim = simulate_scm(graph, n_normal + size, coeffs, drng, cfg.edge_lag, cfg.noise_scale)
    sim, truth = inject_structural(sim, root, n_normal, size, drng)
    t_start = n_normal + lag_distances(graph, root, cfg.edge_lag).get(target, 0)
    t_size = min(size, n_normal + size - t_start)
    if kind == STRUCTURAL:
        sim, t2 = inject_structural(sim, target, t_start, t_size, drng)
    else:
        sim, t2 = inject_parametric(sim, target, t_start, t_size, drng, cfg.coeff_low, cfg.coeff_high)
    truth = truth | t2
    data = sim.data
    normal = data.slice(0, n_normal).with_regime(NORMAL)
    anomalous = data.slice(n_normal, n_normal + size).with_regime(ANOMALOUS)
    episode = episode_from_truth(graph, truth, n_normal, size, cfg.edge_lag)
    return TrialInputs(graph, normal, anomalous, episode, truth)


def run_trial(cfg: SimConfig, engine_cfg: EngineConfig, graph_index: int, size: int, kind: str):
    """Return ``(inputs, report, f1)`` for one trial."""
    inputs = make_trial(cfg, graph_index, size, kind, engine_cfg.n_chunks)
    report = easy_rca(inputs.graph, inputs.normal, inputs.anomalous, inputs.episode, engine_cfg)
    return inputs, report, score_report(report, inputs.truth)


@dataclass(frozen=True)
class BenchmarkRow:
    intervention: str
    size: int
    mean_f1: float
    std_f1: float
    n_seeds: int
    scores: tuple[float, ...] = field(default=(), repr=False)


def _trial_f1(args):
    cfg, engine_cfg, g, size, kind = args
    return run_trial(cfg, engine_cfg, g, size, kind)[2]


def run_benchmark(cfg: SimConfig, engine_cfg: EngineConfig, kinds: Sequence[str] = (STRUCTURAL, PARAMETRIC),
                  workers: int = 1) -> list[BenchmarkRow]:
    """Mean and (population) standard deviation of F1 per intervention type and size."""
    jobs = [(cfg, engine_cfg, g, size, kind) for kind in kinds for size in cfg.anomaly_sizes
            for g in range(cfg.n_graphs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            scores = list(pool.map(_trial_f1, jobs, chunksize=4))
    else:
        scores = [_trial_f1(j) for j in jobs]
    rows, i = [], 0
    for kind in kinds:
        for size in cfg.anomaly_sizes:
            s = np.array(scores[i:i + cfg.n_graphs])
            i += cfg.n_graphs
            rows.append(BenchmarkRow(kind, size, float(s.mean()), float(s.std()), len(s), tuple(s.tolist())))
            log.info("%s size=%d mean F1=%.3f", kind, size, s.mean())
    return rows


def benchmark_csv(rows: Sequence[BenchmarkRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["type", "size", "mean_f1", "std_f1", "n_seeds"])
    for r in rows:
        w.writerow([r.intervention, r.size, f"{r.mean_f1:.4f}", f"{r.std_f1:.4f}", r.n_seeds])
    return buf.getvalue()


def benchmark_table(rows: Sequence[BenchmarkRow]) -> str:
    lines = [f"{'type':<11} {'size':>6} {'mean F1':>8} {'std F1':>7} {'seeds':>6}"]
    for r in rows:
        lines.append(f"{r.intervention:<11} {r.size:>6} {r.mean_f1:>8.3f} {r.std_f1:>7.3f} {r.n_seeds:>6}")
    return "\n".join(lines)
