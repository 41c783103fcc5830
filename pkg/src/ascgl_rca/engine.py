"""End-to-end root-cause identification and the report it produces."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from . import effects
from .anomaly import (AnomalyEpisode, LinkedAnomalousGraph, decompose, find_sub_roots,
                      find_time_defying)
from .dataset import RegimeDataset
from .errors import AnalysisError, InvalidEpisode, LagExceedsMax
from .graph import ASCGL

log = logging.getLogger(__name__)

REPORT_VERSION = 1


@dataclass(frozen=True)
class EngineConfig:
    gamma_max: int = 3
    alpha: float = 0.01
    n_chunks: int = 10
    parallel: bool = False

    def __post_init__(self):
        if not isinstance(self.gamma_max, int) or self.gamma_max < 1:
            raise ValueError(f"gamma_max must be an integer >= 1, got {self.gamma_max!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha!r}")
        if not isinstance(self.n_chunks, int) or self.n_chunks < 3:
            raise ValueError(f"n_chunks must be an integer >= 3, got {self.n_chunks!r}")

    def parameters(self) -> dict:
        return {"gamma_max": self.gamma_max, "alpha": self.alpha, "n_chunks": self.n_chunks,
                "chunking": "contiguous-recent"}


@dataclass(frozen=True)
class DataDrivenCause:
    vertex: str
    classification: str
    cause: str
    detecting_gamma: int
    evidence: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Diagnostic:
    vertex: str
    cause: str
    gamma: int | None
    reason: str
    message: str


@dataclass(frozen=True)
class LagReport:
    members: tuple[str, ...]
    sub_roots: tuple[str, ...]
    time_defying: tuple[str, ...]
    data_driven: tuple[DataDrivenCause, ...] = ()
    tests_run: int = 0
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def root_causes(self) -> frozenset[str]:
        return frozenset(self.sub_roots) | frozenset(self.time_defying) | {d.vertex for d in self.data_driven}


@dataclass(frozen=True)
class RootCauseReport:
    lags: tuple[LagReport, ...] = ()
    parameters: dict | None = None

    @property
    def sub_roots(self) -> frozenset[str]:
        return frozenset(v for lag in self.lags for v in lag.sub_roots)

    @property
    def time_defying(self) -> frozenset[str]:
        return frozenset(v for lag in self.lags for v in lag.time_defying)

    @property
    def data_driven(self) -> dict[str, str]:
        """Vertex -> structural/parametric label for data-driven root causes."""
        return {d.vertex: d.classification for lag in self.lags for d in lag.data_driven}

    @property
    def root_causes(self) -> frozenset[str]:
        return frozenset().union(*(lag.root_causes for lag in self.lags))

    @property
    def analysis_impossible(self) -> bool:
        """Edge tests were needed but every one of them failed."""
        failed = any(d.reason == "estimation-failed" for lag in self.lags for d in lag.diagnostics)
        return failed and sum(lag.tests_run for lag in self.lags) == 0


def anomaly_lag(episode: AnomalyEpisode, x: str, y: str, gamma_max: int | None = None) -> int:
    """Lag between the anomaly on ``x`` and on ``y``, clamped at 0.

    Raises :class:`LagExceedsMax` when it is larger than ``gamma_max``.
    """
    t = episode.appearance_time
    for v in (x, y):
        if v not in t:
            raise InvalidEpisode(f"{v!r} is not part of the anomaly episode")
    lag = max(0, t[y] - t[x])
    if gamma_max is not None and lag > gamma_max:
        raise LagExceedsMax(f"anomaly reaches {y} {lag} samples after {x}, more than gamma_max={gamma_max}")
    return lag


def _analyse_lag(graph: ASCGL, normal: RegimeDataset, anomalous: RegimeDataset, episode: AnomalyEpisode,
                 lag: LinkedAnomalousGraph, cfg: EngineConfig) -> LagReport:
    sub_roots = find_sub_roots(lag)
    time_defying = find_time_defying(lag, episode) - sub_roots
    found, diags, tests = [], [], 0
    length = episode.interval_length
    for y in sorted(lag.members - sub_roots - time_defying):
        detected = None
        causes = sorted(graph.parents(y) & lag.members)
        if y in graph.loops:
            causes.append(y)
        for x in causes:
            try:
                gbar = anomaly_lag(episode, x, y, cfg.gamma_max)
            except LagExceedsMax as exc:
                diags.append(Diagnostic(y, x, None, "lag-exceeds-max", str(exc)))
                continue
            if x == y:
                gbar = 1
            for gamma in range(gbar, cfg.gamma_max + 1):
                try:
                    pooled = effects.pooled_normal_fit(graph, normal, x, y, gamma, cfg.gamma_max, length, cfg.n_chunks)
                    if effects.coefficient_zero_test(pooled, cfg.alpha):
                        tests += 1
                        continue
                    verdict = effects.compare_direct_effects(graph, normal, anomalous, x, y, gamma, cfg.gamma_max,
                                                             cfg.alpha, cfg.n_chunks, length)
                except AnalysisError as exc:
                    log.info("edge %s->%s at lag %d not testable: %s", x, y, gamma, exc)
                    diags.append(Diagnostic(y, x, gamma, "estimation-failed", f"{type(exc).__name__}: {exc}"))
                    continue
                tests += 1
                if verdict.changed:
                    evidence = dict(verdict.details, normal_pooled_coefficient=pooled.cause_coefficient,
                                    normal_pooled_stderr=pooled.stderr)
                    detected = DataDrivenCause(y, verdict.classification, x, gamma, evidence)
                    break
            if detected is not None:
                break
        if detected is not None:
            found.append(detected)
    return LagReport(tuple(sorted(lag.members)), tuple(sorted(sub_roots)), tuple(sorted(time_defying)),
                     tuple(found), tests, tuple(diags))


def easy_rca(graph: ASCGL, normal: RegimeDataset, anomalous: RegimeDataset, episode: AnomalyEpisode,
             config: EngineConfig = EngineConfig()) -> RootCauseReport:
    """Identify root causes of an anomaly episode.

    The anomalous vertices are split into linked anomalous graphs, each
    handled independently: sub-roots and time-defying vertices are read
    off the graph and the appearance times, and every other member is
    tested for a change in the direct effect of each anomalous parent
    (its own past included when it is looped), scanning lags from the
    observed anomaly lag up to ``gamma_max``.
    """
    episode.check_against(graph)
    normal.require(graph.vertices)
    anomalous.require(graph.vertices)
    if len(anomalous) < episode.interval_length:
        raise InvalidEpisode(f"anomalous data has {len(anomalous)} samples, episode interval is {episode.interval_length}")
    groups = decompose(graph, episode)

    def work(lag):
        return _analyse_lag(graph, normal, anomalous, episode, lag, config)

    if config.parallel and len(groups) > 1:
        with ThreadPoolExecutor() as pool:
            lag_reports = list(pool.map(work, groups))
    else:
        lag_reports = [work(g) for g in groups]
    return RootCauseReport(tuple(lag_reports), config.parameters())


def _lag_to_dict(lag: LagReport) -> dict:
    return {
        "members": list(lag.members),
        "sub_roots": list(lag.sub_roots),
        "time_defying": list(lag.time_defying),
        "data_driven": [
            {"vertex": d.vertex, "classification": d.classification, "cause": d.cause,
             "detecting_gamma": d.detecting_gamma, "evidence": d.evidence}
            for d in sorted(lag.data_driven, key=lambda d: d.vertex)
        ],
        "tests_run": lag.tests_run,
        "diagnostics": [asdict(d) for d in lag.diagnostics],
    }


def report_to_json(report: RootCauseReport) -> str:
    """Deterministic, versioned JSON text for ``report``."""
    obj = {"version": REPORT_VERSION}
    if report.parameters is not None:
        obj["parameters"] = report.parameters
    obj["lags"] = [_lag_to_dict(lag) for lag in report.lags]
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def report_from_json(text: str) -> RootCauseReport:
    obj = json.loads(text)
    if obj.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {obj.get('version')!r}")
    lags = []
    for entry in obj["lags"]:
        lags.append(LagReport(
            tuple(entry["members"]), tuple(entry["sub_roots"]), tuple(entry["time_defying"]),
            tuple(DataDrivenCause(d["vertex"], d["classification"], d["cause"], d["detecting_gamma"], d["evidence"])
                  for d in entry.get("data_driven", [])),
            entry.get("tests_run", 0),
            tuple(Diagnostic(**d) for d in entry.get("diagnostics", [])),
        ))
    return RootCauseReport(tuple(lags), obj.get("parameters"))
