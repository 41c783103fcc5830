"""Adjustment sets for lagged effects, least-squares estimation, and regime-change tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .dataset import RegimeDataset
from .errors import (ChunkingImpossible, InsufficientSamples, LagOutOfRange, NoSuchEdge,
                     RankDeficient)
from .graph import ASCGL, LaggedVariable

NONE = "none"
STRUCTURAL = "structural"
PARAMETRIC = "parametric"


@dataclass(frozen=True)
class AdjustmentSet:
    variables: frozenset[LaggedVariable]
    cause: LaggedVariable
    effect: LaggedVariable

    def ordered(self) -> list[LaggedVariable]:
        return sorted(self.variables)

    def __len__(self):
        return len(self.variables)

    def __contains__(self, item):
        return item in self.variables


def _check_edge(graph: ASCGL, x: str, y: str, gamma_xy: int, gamma_max: int) -> None:
    if x == y or not graph.has_edge(x, y):
        raise NoSuchEdge(f"{x}->{y} is not a cross edge of the graph")
    if not 0 <= gamma_xy <= gamma_max:
        raise LagOutOfRange(f"gamma_xy={gamma_xy} outside [0, gamma_max={gamma_max}]")


def total_effect_adjustment_set(graph: ASCGL, x: str, y: str, gamma_xy: int, gamma_max: int) -> AdjustmentSet:
    """Conditioning set for the total effect of ``x`` at lag ``gamma_xy`` on ``y`` now.

    Parents of ``x`` (other than ``x``) at lags ``gamma_xy..gamma_xy+gamma_max``,
    plus the past ``gamma_xy+1..gamma_xy+gamma_max`` of ``x`` when ``x`` is looped.
    """
    _check_edge(graph, x, y, gamma_xy, gamma_max)
    out = {LaggedVariable(b, k) for b in graph.parents(x) for k in range(gamma_xy, gamma_xy + gamma_max + 1)}
    if x in graph.loops:
        out |= {LaggedVariable(x, k) for k in range(gamma_xy + 1, gamma_xy + gamma_max + 1)}
    return AdjustmentSet(frozenset(out), LaggedVariable(x, gamma_xy), LaggedVariable(y, 0))


def direct_effect_adjustment_set(graph: ASCGL, x: str, y: str, gamma_xy: int, gamma_max: int) -> AdjustmentSet:
    """Conditioning set isolating the edge ``x@gamma_xy -> y@0``.

    The other parents of ``y`` at lags ``0..gamma_max``; when ``y`` is looped,
    also every other lag of ``x`` up to ``gamma_max`` and ``y``'s own past.
    With ``x == y`` the edge is the self-loop and ``gamma_xy`` must be at least 1.
    """
    if x == y:
        return _loop_adjustment_set(graph, y, gamma_xy, gamma_max)
    _check_edge(graph, x, y, gamma_xy, gamma_max)
    others = graph.parents(y) - {x}
    out = {LaggedVariable(b, k) for b in others for k in range(gamma_max + 1)}
    if y in graph.loops:
        out |= {LaggedVariable(x, k) for k in range(gamma_max + 1) if k != gamma_xy}
        out |= {LaggedVariable(y, k) for k in range(1, gamma_max + 1)}
    return AdjustmentSet(frozenset(out), LaggedVariable(x, gamma_xy), LaggedVariable(y, 0))


def _loop_adjustment_set(graph: ASCGL, y: str, gamma: int, gamma_max: int) -> AdjustmentSet:
    # the self-loop y@gamma -> y@0: cross parents at every lag, y's other past lags
    if y not in graph.loops:
        raise NoSuchEdge(f"{y} has no self-loop")
    if not 1 <= gamma <= gamma_max:
        raise LagOutOfRange(f"self-loop lag {gamma} outside [1, gamma_max={gamma_max}]")
    out = {LaggedVariable(b, k) for b in graph.parents(y) for k in range(gamma_max + 1)}
    out |= {LaggedVariable(y, k) for k in range(1, gamma_max + 1) if k != gamma}
    return AdjustmentSet(frozenset(out), LaggedVariable(y, gamma), LaggedVariable(y, 0))


def build_lagged_design(data: RegimeDataset, effect: LaggedVariable, regressors: Sequence[LaggedVariable],
                        window: Optional[tuple[int, int]] = None, intercept: bool = True):
    """Design matrix and response for a lagged regression over ``window``.

    Rows are the times ``t`` in ``[start + max_lag, stop)`` so that every
    lagged value is read from inside the window. Column ``j`` holds
    ``regressors[j].vertex`` at ``t - regressors[j].lag``; a column of ones is
    appended when ``intercept`` is set.
    """
    start, stop = window if window is not None else (0, len(data))
    if not 0 <= start <= stop <= len(data):
        raise InsufficientSamples(f"window [{start}, {stop}) outside data of length {len(data)}")
    lags = [r.lag for r in regressors] + [effect.lag]
    max_lag = max(lags)
    first = start + max_lag
    n_rows = stop - first
    n_cols = len(regressors) + (1 if intercept else 0)
    if n_rows < len(regressors) + 2:
        raise InsufficientSamples(
            f"{max(n_rows, 0)} usable rows in window [{start}, {stop}) for {len(regressors)} regressors (max lag {max_lag})")
    design = np.empty((n_rows, n_cols))
    for j, r in enumerate(regressors):
        col = data.column(r.vertex)
        design[:, j] = col[first - r.lag: stop - r.lag]
    if intercept:
        design[:, -1] = 1.0
    y = data.column(effect.vertex)[first - effect.lag: stop - effect.lag]
    return design, np.array(y)


@dataclass(frozen=True)
class RegressionFit:
    coefficients: tuple[float, ...]
    cause_index: int
    stderr: float
    dof: int
    n_samples: int
    rss: float
    names: tuple[str, ...] = ()

    @property
    def cause_coefficient(self) -> float:
        return self.coefficients[self.cause_index]

    @property
    def t_statistic(self) -> float:
        c = self.cause_coefficient
        if self.stderr > 0:
            return c / self.stderr
        return 0.0 if c == 0 else float(np.copysign(np.inf, c))


def ols_fit(design: np.ndarray, response: np.ndarray, cause_column: int = 0, names: Sequence[str] = ()) -> RegressionFit:
    """Ordinary least squares with the standard error of one coefficient.

    The standard error is ``sqrt(rss / dof * inv(X'X)[j, j])``. Raises
    :class:`RankDeficient` rather than dropping collinear columns.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    n, p = design.shape
    if n <= p:
        raise InsufficientSamples(f"{n} rows for {p} columns")
    rank = np.linalg.matrix_rank(design)
    if rank < p:
        raise RankDeficient(f"design with {p} columns has rank {rank}")
    q, r = np.linalg.qr(design)
    coef = np.linalg.solve(r, q.T @ response)
    resid = response - design @ coef
    rss = float(resid @ resid)
    dof = n - p
    r_inv = np.linalg.inv(r)
    var_j = float(np.sum(r_inv[cause_column] ** 2))
    stderr = float(np.sqrt(rss / dof * var_j))
    return RegressionFit(tuple(float(c) for c in coef), cause_column, stderr, dof, n, rss, tuple(names))


def fit_direct_effect(data: RegimeDataset, adjustment: AdjustmentSet, window: Optional[tuple[int, int]] = None) -> RegressionFit:
    """Regress the effect on the cause, the adjustment set and an intercept."""
    regressors = [adjustment.cause] + adjustment.ordered()
    design, y = build_lagged_design(data, adjustment.effect, regressors, window, intercept=True)
    names = tuple(str(r) for r in regressors) + ("intercept",)
    return ols_fit(design, y, 0, names)


def grubbs_critical_value(n: int, alpha: float) -> float:
    """Two-sided Grubbs critical value for ``n`` observations."""
    t = stats.t.ppf(1 - alpha / (2 * n), n - 2)
    return (n - 1) / np.sqrt(n) * np.sqrt(t * t / (n - 2 + t * t))


@dataclass(frozen=True)
class GrubbsResult:
    outlier: bool
    statistic: float
    critical: float
    candidate_is_extreme: bool


def grubbs_test(values: Sequence[float], candidate_index: int, alpha: float = 0.01) -> GrubbsResult:
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError(f"Grubbs test needs at least 3 values, got {n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    crit = float(grubbs_critical_value(n, alpha))
    dev = np.abs(x - x.mean())
    s = x.std(ddof=1)
    if s == 0:
        return GrubbsResult(False, 0.0, crit, True)
    g = float(dev[candidate_index] / s)
    extreme = bool(dev[candidate_index] >= dev.max() * (1 - 1e-12))
    return GrubbsResult(extreme and g > crit, g, crit, extreme)


def grubbs_outlier_test(values: Sequence[float], candidate_index: int, alpha: float = 0.01) -> bool:
    """True iff ``values[candidate_index]`` is the most extreme value and a Grubbs outlier."""
    return grubbs_test(values, candidate_index, alpha).outlier


def coefficient_zero_test(fit: RegressionFit, alpha: float = 0.01) -> bool:
    """Two-sided t-test; True when the cause coefficient is not distinguishable from zero."""
    c = fit.cause_coefficient
    if c == 0:
        return True
    if fit.stderr == 0:
        return False
    return abs(c / fit.stderr) <= stats.t.ppf(1 - alpha / 2, fit.dof)


@dataclass(frozen=True)
class ChangeVerdict:
    changed: bool
    anomalous_effect_zero: bool
    classification: str
    details: dict = field(default_factory=dict, compare=False, hash=False)


def normal_chunk_windows(normal_length: int, window_length: int, n_chunks: int) -> list[tuple[int, int]]:
    """Contiguous, non-overlapping windows ending at the last normal sample."""
    if window_length <= 0 or n_chunks * window_length > normal_length:
        raise ChunkingImpossible(
            f"need {n_chunks} x {window_length} normal samples, have {normal_length}")
    end = normal_length
    return [(end - (n_chunks - k) * window_length, end - (n_chunks - k - 1) * window_length) for k in range(n_chunks)]


def pooled_normal_fit(graph: ASCGL, normal: RegimeDataset, x: str, y: str, gamma_xy: int, gamma_max: int,
                      window_length: int, n_chunks: int = 10) -> RegressionFit:
    """Direct-effect fit over the concatenation of the normal chunks."""
    adj = direct_effect_adjustment_set(graph, x, y, gamma_xy, gamma_max)
    chunks = normal_chunk_windows(len(normal), window_length, n_chunks)
    return fit_direct_effect(normal, adj, (chunks[0][0], chunks[-1][1]))


def compare_direct_effects(graph: ASCGL, normal: RegimeDataset, anomalous: RegimeDataset, x: str, y: str,
                           gamma_xy: int, gamma_max: int, alpha: float = 0.01, n_chunks: int = 10,
                           window_length: Optional[int] = None) -> ChangeVerdict:
    """Decide whether the direct effect ``x@gamma_xy -> y@0`` differs in the anomalous regime.

    The same regression is fitted on the first ``window_length`` anomalous
    samples and on ``n_chunks`` equally long chunks from the end of the normal
    regime; a Grubbs test asks whether the anomalous coefficient is the
    outlier among them.
    """
    length = len(anomalous) if window_length is None else window_length
    if length > len(anomalous):
        raise InsufficientSamples(f"anomalous window of {length} samples, data has {len(anomalous)}")
    adj = direct_effect_adjustment_set(graph, x, y, gamma_xy, gamma_max)
    chunks = normal_chunk_windows(len(normal), length, n_chunks)
    anomalous_fit = fit_direct_effect(anomalous, adj, (0, length))
    normal_fits = [fit_direct_effect(normal, adj, w) for w in chunks]

    coefs = [f.cause_coefficient for f in normal_fits] + [anomalous_fit.cause_coefficient]
    g = grubbs_test(coefs, len(coefs) - 1, alpha)
    is_zero = coefficient_zero_test(anomalous_fit, alpha)
    if not g.outlier:
        label = NONE
    elif is_zero:
        label = STRUCTURAL
    else:
        label = PARAMETRIC
    details = {
        "normal_coefficients": [f.cause_coefficient for f in normal_fits],
        "anomalous_coefficient": anomalous_fit.cause_coefficient,
        "anomalous_stderr": anomalous_fit.stderr,
        "anomalous_t": anomalous_fit.t_statistic if np.isfinite(anomalous_fit.t_statistic) else None,
        "t_critical": float(stats.t.ppf(1 - alpha / 2, anomalous_fit.dof)),
        "grubbs_statistic": g.statistic,
        "grubbs_critical": g.critical,
        "n_rows": anomalous_fit.n_samples,
    }
    if anomalous_fit.stderr == 0 and anomalous_fit.cause_coefficient != 0:
        details["degenerate_fit"] = True
    return ChangeVerdict(g.outlier, is_zero, label, details)
