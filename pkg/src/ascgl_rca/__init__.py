"""Root causes of collective anomalies from a summary causal graph with loops."""

import json
from importlib import resources

from .anomaly import (AnomalyEpisode, LinkedAnomalousGraph, decompose, find_sub_roots, find_time_defying,
                      load_episode)
from .dataset import RegimeDataset, parse_timeseries_csv, write_timeseries_csv
from .effects import (compare_direct_effects, direct_effect_adjustment_set, fit_direct_effect,
                      grubbs_outlier_test, total_effect_adjustment_set)
from .engine import EngineConfig, RootCauseReport, easy_rca, report_from_json, report_to_json
from .errors import AnalysisError, InputError, RCAError
from .graph import ASCGL, LaggedVariable, load_graph, parents, unroll, validate_ascgl
from .separation import canonical_separating_set, d_separated_ascgl, d_separated_dag

__version__ = "0.1.0"


def it_monitoring_graph() -> ASCGL:
    """The eight-service IT monitoring graph shipped with the package."""
    with resources.files(__package__).joinpath("data/it_monitoring.json").open(encoding="utf-8") as fh:
        return ASCGL.from_dict(json.load(fh))
