"""Command-line entry point: analyze, simulate, benchmark, check-dsep."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

from .anomaly import load_episode, save_episode
from .dataset import ANOMALOUS, NORMAL, parse_timeseries_csv, write_timeseries_csv
from .engine import EngineConfig, RootCauseReport, easy_rca, report_to_json
from .errors import InputError, RCAError
from .graph import load_graph, save_graph
from .separation import d_separated_ascgl
from .simgen import SimConfig, benchmark_csv, benchmark_table, make_trial, run_benchmark

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IMPOSSIBLE = 3

log = logging.getLogger("ascgl_rca")


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _engine_config(args) -> EngineConfig:
    try:
        return EngineConfig(gamma_max=args.gamma_max, alpha=args.alpha, n_chunks=args.chunks,
                            parallel=getattr(args, "parallel", False))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def summary_table(report: RootCauseReport) -> str:
    lines = [f"{'LAG':<4} {'sub-roots':<20} {'time-defying':<20} data-driven"]
    for i, lag in enumerate(report.lags):
        dd = ", ".join(f"{d.vertex} ({d.classification})" for d in lag.data_driven) or "-"
        lines.append(f"{i:<4} {', '.join(lag.sub_roots) or '-':<20} {', '.join(lag.time_defying) or '-':<20} {dd}")
    lines.append(f"root causes: {', '.join(sorted(report.root_causes)) or '-'}")
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    cfg = _engine_config(args)
    graph = load_graph(args.graph)
    normal = parse_timeseries_csv(args.normal, NORMAL)
    anomalous = parse_timeseries_csv(args.anomalous, ANOMALOUS)
    episode = load_episode(args.anomalies)
    report = easy_rca(graph, normal, anomalous, episode, cfg)
    for lag in report.lags:
        for d in lag.diagnostics:
            print(f"warning: {d.cause}->{d.vertex}: {d.message}", file=sys.stderr)
    if report.analysis_impossible:
        print("error: no edge of the anomaly episode could be tested", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    if args.out:
        _write_atomic(args.out, report_to_json(report))
    print(summary_table(report))
    return EXIT_OK


def _sim_config(args) -> SimConfig:
    kw = {}
    if args.config:
        kw.update(json.loads(Path(args.config).read_text(encoding="utf-8")).get("sim", {}))
    if args.seed is not None:
        kw["seed"] = args.seed
    for name in ("n_graphs", "n_vertices"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if getattr(args, "sizes", None):
        kw["anomaly_sizes"] = tuple(args.sizes)
    known = {f.name for f in fields(SimConfig)}
    unknown = set(kw) - known
    if unknown:
        raise InputError(f"unknown simulation settings {sorted(unknown)}")
    try:
        return SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    engine_cfg = _engine_config(args)
    graph = load_graph(args.graph) if args.graph else None
    trial = make_trial(cfg, args.graph_index, args.size, args.type, engine_cfg.n_chunks, graph=graph)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(trial.graph, out / "graph.json")
    write_timeseries_csv(trial.normal, out / "normal.csv")
    write_timeseries_csv(trial.anomalous, out / "anomalous.csv")
    save_episode(trial.episode, out / "anomalies.json")
    (out / "truth.json").write_text(json.dumps(trial.truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}: {len(trial.graph.vertices)} vertices, {len(trial.normal)} normal and "
          f"{len(trial.anomalous)} anomalous samples, intervened {sorted(trial.truth.intervened)}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _sim_config(args)
    engine_kw = {}
    if args.config:
        engine_kw = json.loads(Path(args.config).read_text(encoding="utf-8")).get("engine", {})
    try:
        engine_cfg = EngineConfig(**{**{"gamma_max": args.gamma_max, "alpha": args.alpha, "n_chunks": args.chunks},
                                     **engine_kw})
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    rows = run_benchmark(cfg, engine_cfg, args.types, workers=args.workers)
    if args.out:
        _write_atomic(args.out, benchmark_csv(rows))
    print(benchmark_table(rows))
    return EXIT_OK


def cmd_check_dsep(args) -> int:
    graph = load_graph(args.graph)
    xs, ys = _split(args.x), _split(args.y)
    separated, z = d_separated_ascgl(graph, xs, ys)
    verdict = "separated" if separated else "not separated under the canonical set"
    print(f"{verdict}; Z = {{{', '.join(sorted(z))}}}")
    return EXIT_OK


def _split(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_engine_flags(p, with_parallel=True):
    p.add_argument("--gamma-max", type=int, default=3, help="maximal lag (default 3)")
    p.add_argument("--alpha", type=float, default=0.01, help="significance level (default 0.01)")
    p.add_argument("--chunks", type=int, default=10, help="number of normal chunks (default 10)")
    if with_parallel:
        p.add_argument("--parallel", action="store_true", help="analyse linked anomalous graphs concurrently")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ascgl-rca", description="Root causes of collective anomalies on a summary causal graph.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="identify root causes of an anomaly episode")
    p.add_argument("--graph", required=True, help="graph JSON")
    p.add_argument("--normal", required=True, help="normal-regime CSV")
    p.add_argument("--anomalous", required=True, help="anomalous-regime CSV")
    p.add_argument("--anomalies", required=True, help="anomaly episode JSON")
    p.add_argument("--out", help="report JSON path")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="write the inputs of one synthetic trial")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="benchmark config JSON ({'sim': {...}, 'engine': {...}})")
    p.add_argument("--graph", help="use this graph instead of a random one")
    p.add_argument("--graph-index", type=int, default=0)
    p.add_argument("--size", type=int, default=500, help="anomaly size")
    p.add_argument("--type", choices=["structural", "parametric"], default="structural")
    _add_engine_flags(p, with_parallel=False)
    p.set_defaults(func=cmd_simulate, n_graphs=None, n_vertices=None, sizes=None)

    p = sub.add_parser("benchmark", help="run the synthetic F1 benchmark")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="benchmark config JSON")
    p.add_argument("--n-graphs", type=int)
    p.add_argument("--n-vertices", type=int)
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--types", nargs="+", choices=["structural", "parametric"], default=["structural", "parametric"])
    p.add_argument("--workers", type=int, default=1)
    _add_engine_flags(p, with_parallel=False)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("check-dsep", help="test separation of two vertex sets under the parent-based set")
    p.add_argument("--graph", required=True)
    p.add_argument("-x", required=True, help="comma-separated vertices")
    p.add_argument("-y", required=True, help="comma-separated vertices")
    p.set_defaults(func=cmd_check_dsep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RCAError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE


if __name__ == "__main__":
    sys.exit(main())
