"""Experiment orchestration: JSON config parsing, seed ensembles over a
grid of (lattice size, regime, distribution) cells, and report emission.

Config file (JSON)::

    {
      "defaults": {"thresholds": [0.1, ..., 1e-05], "stop_epsilon": 1e-12,
                   "max_rounds": 200000, "topology_seed": 1, "data_seed": 1,
                   "distribution": {"kind": "uniform", "lo": 0.0, "hi": 1.0}},
      "runs": [{"rows": 32, "cols": 32, "mode": "evolutionary"},
               {"rows": 32, "cols": 32, "mode": "frozen",
                "freeze_threshold": 1e-05}],
      "seeds": 11,
      "metrics_at": [0.001],
      "out": "results",
      "format": "both"
    }

Per-run keys override ``defaults``; command-line flags override both.
Ensemble member k of a cell runs with (topology_seed + k, data_seed + k).

Outputs: one ``table_<mode>.csv`` per regime (rows = cells, columns =
thresholds, entries = ensemble median of first-crossing rounds) and a
``report.json`` bundle::

    {"config": <config echo>,
     "cells": [{"index", "label", "rows", "cols", "mode", "distribution",
                "freeze_threshold",
                "members": [{"member", "topology_seed", "data_seed",
                             "crossings", "stop_reason", "rounds",
                             "final_b", "final_mean"}],
                "aggregate": {"median", "min", "max", "n_crossed"},
                "metrics": [{"at_threshold", <metric fields>}],
                "error"}],
     "versions": {...},
     "timings": {...}}

Everything outside the "timings" section is a pure function of the
config, so fixed-seed runs emit byte-identical artifacts.

Exit codes: 0 success, 1 config error, 2 every cell failed, 3 some
cells failed.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .analytics import metrics_to_dict, sampled_cpl, shortest_path_stats
from .datagen import DistributionSpec, generate
from .dynamics import RunConfig, run, run_frozen
from .graph import LatticeSpec, build_moore_lattice, save_edge_list


class ConfigError(ValueError):
    """Invalid experiment configuration, located by field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunCell:
    """One grid cell: a lattice, a run configuration, and a data layout."""

    lattice: LatticeSpec
    run: RunConfig
    dist: DistributionSpec
    label: str = ""

    def __post_init__(self):
        if not self.label:
            suffix = "" if self.dist.kind == "uniform" else f" {self.dist.kind}"
            freeze = ""
            if self.run.mode == "frozen" and self.run.freeze_threshold is not None:
                freeze = f" freeze<{self.run.freeze_threshold:.6g}"
            self.label = f"{self.lattice.rows}x{self.lattice.cols}{suffix}{freeze}"


@dataclass
class ExperimentConfig:
    cells: list[RunCell]
    seeds: int = 1
    metrics_at: tuple[float, ...] = ()
    out_dir: str = "results"
    formats: tuple[str, ...] = ("csv", "json")
    metrics_method: str = "auto"
    metrics_sample: int = 1024
    save_snapshots: bool = False  # export metrics_at topologies as edge lists

    def __post_init__(self):
        if not self.cells:
            raise ConfigError("runs", "at least one run is required")
        if self.seeds < 1:
            raise ConfigError("seeds", f"ensemble size must be >= 1, got {self.seeds}")
        self.metrics_at = tuple(float(t) for t in self.metrics_at)
        self.formats = tuple(self.formats)
        for f in self.formats:
            if f not in ("csv", "json"):
                raise ConfigError("format", f"unknown format {f!r}")


_RUN_KEYS = {
    "rows", "cols", "mode", "distribution", "thresholds", "stop_epsilon",
    "max_rounds", "topology_seed", "data_seed", "freeze_threshold",
    "fresh_phase2_data", "label",
}


def _dist_from_obj(obj, path: str) -> DistributionSpec:
    if not isinstance(obj, dict):
        raise ConfigError(path, f"distribution must be an object, got {type(obj).__name__}")
    kind = obj.get("kind", "uniform")
    try:
        if kind == "quadrant":
            values = obj.get("values", obj.get("quadrant_values", (1.0, 2.0, 3.0, 4.0)))
            return DistributionSpec(kind="quadrant", quadrant_values=tuple(values))
        return DistributionSpec(
            kind=kind, lo=float(obj.get("lo", 0.0)), hi=float(obj.get("hi", 1.0))
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from None


def _cell_from_obj(obj: dict, defaults: dict, index: int) -> RunCell:
    path = f"runs[{index}]"
    merged = dict(defaults)
    merged.update(obj)
    unknown = set(merged) - _RUN_KEYS
    if unknown:
        raise ConfigError(path, f"unknown keys: {sorted(unknown)}")
    try:
        lattice = LatticeSpec(int(merged.get("rows", 32)), int(merged.get("cols", 32)))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}.rows/cols", str(e)) from None
    dist = _dist_from_obj(merged.get("distribution", {}), f"{path}.distribution")
    kwargs = {}
    for key in ("mode", "stop_epsilon", "max_rounds", "topology_seed",
                "data_seed", "freeze_threshold", "fresh_phase2_data"):
        if key in merged:
            kwargs[key] = merged[key]
    if "thresholds" in merged:
        kwargs["thresholds"] = tuple(merged["thresholds"])
    try:
        run_cfg = RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from None
    if run_cfg.mode == "frozen" and run_cfg.freeze_threshold is None:
        raise ConfigError(f"{path}.freeze_threshold", "frozen mode needs freeze_threshold")
    return RunCell(lattice, run_cfg, dist, label=str(merged.get("label", "")))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, applying defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, col {e.colno}", e.msg) from None
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")
    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict):
        raise ConfigError("defaults", "must be an object")
    runs = doc.get("runs", [])
    if not isinstance(runs, list) or not runs:
        raise ConfigError("runs", "must be a non-empty list")
    cells = [_cell_from_obj(obj, defaults, i) for i, obj in enumerate(runs)]
    fmt = doc.get("format", "both")
    formats = ("csv", "json") if fmt == "both" else (fmt,)
    try:
        return ExperimentConfig(
            cells=cells,
            seeds=int(doc.get("seeds", 1)),
            metrics_at=tuple(doc.get("metrics_at", ())),
            out_dir=str(doc.get("out", "results")),
            formats=formats,
            metrics_method=str(doc.get("metrics_method", "auto")),
            metrics_sample=int(doc.get("metrics_sample", 1024)),
            save_snapshots=bool(doc.get("save_snapshots", False)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("$", str(e)) from None


def emit_config(config: ExperimentConfig) -> str:
    """Serialize a config so that parse_config round-trips it."""
    runs = []
    for cell in config.cells:
        dist: dict = {"kind": cell.dist.kind}
        if cell.dist.kind == "uniform":
            dist.update(lo=cell.dist.lo, hi=cell.dist.hi)
        else:
            dist["values"] = list(cell.dist.quadrant_values)
        entry = {
            "rows": cell.lattice.rows,
            "cols": cell.lattice.cols,
            "mode": cell.run.mode,
            "distribution": dist,
            "thresholds": list(cell.run.thresholds),
            "stop_epsilon": cell.run.stop_epsilon,
            "max_rounds": cell.run.max_rounds,
            "topology_seed": cell.run.topology_seed,
            "data_seed": cell.run.data_seed,
            "fresh_phase2_data": cell.run.fresh_phase2_data,
            "label": cell.label,
        }
        if cell.run.freeze_threshold is not None:
            entry["freeze_threshold"] = cell.run.freeze_threshold
        runs.append(entry)
    fmt = "both" if set(config.formats) == {"csv", "json"} else config.formats[0]
    doc = {
        "runs": runs,
        "seeds": config.seeds,
        "metrics_at": list(config.metrics_at),
        "out": config.out_dir,
        "format": fmt,
        "metrics_method": config.metrics_method,
        "metrics_sample": config.metrics_sample,
        "save_snapshots": config.save_snapshots,
    }
    return json.dumps(doc, indent=2) + "\n"


# --- experiment execution ---------------------------------------------------

def _fmt_thr(thr: float) -> str:
    return f"{thr:.6g}"


def _run_member(cell: RunCell, member: int) -> dict:
    cfg = replace(
        cell.run,
        topology_seed=cell.run.topology_seed + member,
        data_seed=cell.run.data_seed + member,
    )
    if cfg.mode == "frozen":
        trace, _, values = run_frozen(cfg, cell.lattice, cell.dist)
    else:
        topology = build_moore_lattice(cell.lattice)
        init = generate(
            cell.dist, cell.lattice.rows, cell.lattice.cols,
            np.random.default_rng(cfg.data_seed),
        )
        trace, _, values = run(cfg, topology, init)
    return {
        "member": member,
        "topology_seed": cfg.topology_seed,
        "data_seed": cfg.data_seed,
        "crossings": {_fmt_thr(t): r for t, r in sorted(trace.crossings.items(), reverse=True)},
        "stop_reason": trace.stop_reason,
        "rounds": trace.rounds,
        "final_b": trace.b_per_round[-1],
        "final_mean": float(np.mean(values)),
    }


def _aggregate(members: list[dict], thresholds: tuple[float, ...]) -> dict:
    med: dict = {}
    lo: dict = {}
    hi: dict = {}
    n_crossed: dict = {}
    for thr in thresholds:
        key = _fmt_thr(thr)
        vals = [m["crossings"][key] for m in members if key in m["crossings"]]
        n_crossed[key] = len(vals)
        if vals:
            med[key] = float(np.median(vals))
            lo[key] = int(min(vals))
            hi[key] = int(max(vals))
    return {"median": med, "min": lo, "max": hi, "n_crossed": n_crossed}


def _snapshot_metrics(cell: RunCell, config: ExperimentConfig, index: int) -> list[dict]:
    """Analytics on topology snapshots for the first ensemble member.

    For an evolutionary cell, the run is replayed with the target
    threshold alone, which stops at the first crossing and therefore
    reproduces the exact topology present at that moment. Automaton
    cells report their static lattice once; frozen cells are skipped.
    With save_snapshots, each measured topology is also exported as an
    edge list next to the tables.
    """
    rng = np.random.default_rng(0)

    def measure(topology):
        if config.metrics_method == "sampled":
            return sampled_cpl(topology, config.metrics_sample, rng)
        return shortest_path_stats(
            topology, config.metrics_method, sample_size=config.metrics_sample, rng=rng
        )

    def export(topology, tag):
        if not config.save_snapshots:
            return None
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"snapshot_cell{index}_{tag}.edges"
        save_edge_list(topology, path)
        return path.name

    out: list[dict] = []
    if cell.run.mode == "automaton":
        topology = build_moore_lattice(cell.lattice)
        entry = {"at_threshold": None, **metrics_to_dict(measure(topology))}
        entry["snapshot"] = export(topology, "lattice")
        out.append(entry)
        return out
    if cell.run.mode != "evolutionary":
        return out
    for thr in config.metrics_at:
        cfg = replace(cell.run, thresholds=(thr,))
        topology = build_moore_lattice(cell.lattice)
        init = generate(
            cell.dist, cell.lattice.rows, cell.lattice.cols,
            np.random.default_rng(cfg.data_seed),
        )
        trace, topology, _ = run(cfg, topology, init)
        if trace.stop_reason != "thresholds_met":
            out.append({"at_threshold": thr, "error": f"never crossed ({trace.stop_reason})"})
            continue
        entry = {"at_threshold": thr, **metrics_to_dict(measure(topology))}
        entry["snapshot"] = export(topology, f"{thr:.6g}")
        out.append(entry)
    return out


def run_experiment(config: ExperimentConfig, emit: bool = True) -> tuple[dict, list[Path]]:
    """Run every cell's seed ensemble and build (and emit) the report.

    Per-cell failures are recorded in the report without aborting the
    other cells.
    """
    cells_out: list[dict] = []
    timings: list[dict] = []
    for index, cell in enumerate(config.cells):
        t0 = time.perf_counter()
        entry = {
            "index": index,
            "label": cell.label,
            "rows": cell.lattice.rows,
            "cols": cell.lattice.cols,
            "mode": cell.run.mode,
            "distribution": asdict(cell.dist),
            "freeze_threshold": cell.run.freeze_threshold,
            "thresholds": [_fmt_thr(t) for t in cell.run.thresholds],
            "members": [],
            "aggregate": {},
            "metrics": [],
            "error": None,
        }
        try:
            entry["members"] = [_run_member(cell, k) for k in range(config.seeds)]
            entry["aggregate"] = _aggregate(entry["members"], cell.run.thresholds)
            if config.metrics_at:
                entry["metrics"] = _snapshot_metrics(cell, config, index)
        except Exception as e:  # noqa: BLE001 - cell isolation is the contract
            entry["error"] = f"{type(e).__name__}: {e}"
        timings.append({"index": index, "wall_time_s": time.perf_counter() - t0})
        cells_out.append(entry)
    report = {
        "config": _config_echo(config),
        "cells": cells_out,
        "versions": {
            "gossipavg": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "timings": {
            "cells": timings,
            "total_s": sum(t["wall_time_s"] for t in timings),
        },
    }
    paths = emit_report(report, config) if emit else []
    return report, paths


def _config_echo(config: ExperimentConfig) -> dict:
    return json.loads(emit_config(config))


def _table_csv(report: dict, mode: str) -> str:
    cells = [c for c in report["cells"] if c["mode"] == mode]
    thresholds = cells[0]["thresholds"]
    lines = ["size," + ",".join(f"b<{t}" for t in thresholds)]
    for cell in cells:
        if cell["error"]:
            continue
        med = cell["aggregate"].get("median", {})
        row = [cell["label"]]
        for t in thresholds:
            row.append("" if t not in med else f"{med[t]:g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_report(report: dict, config: ExperimentConfig) -> list[Path]:
    """Write the JSON bundle and one CSV table per regime present."""
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths: list[Path] = []
        if "json" in config.formats:
            path = out_dir / "report.json"
            with open(path, "w", encoding="ascii", newline="\n") as f:
                json.dump(report, f, indent=2)
                f.write("\n")
            paths.append(path)
        if "csv" in config.formats:
            for mode in ("evolutionary", "frozen", "automaton"):
                if any(c["mode"] == mode for c in report["cells"]):
                    path = out_dir / f"table_{mode}.csv"
                    with open(path, "w", encoding="ascii", newline="\n") as f:
                        f.write(_table_csv(report, mode))
                    paths.append(path)
    except OSError as e:
        raise OSError(f"writing reports under {out_dir}: {e}") from e
    return paths


# --- command line ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("args", message)


def _build_parser() -> _Parser:
    p = _Parser(prog="gossipavg", description=__doc__.split("\n\n")[0],
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", type=str, help="JSON experiment config file")
    p.add_argument("--mode", choices=("evolutionary", "frozen", "automaton"))
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--distribution", choices=("uniform", "quadrant"))
    p.add_argument("--seed", type=int, help="base seed (topology; data uses seed + 1000003)")
    p.add_argument("--seeds", type=int, help="ensemble size per cell")
    p.add_argument("--thresholds", type=str, help="comma-separated descending thresholds")
    p.add_argument("--stop-epsilon", type=float)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--freeze-at", type=float, help="freeze threshold for frozen mode")
    p.add_argument("--metrics-at", type=str, help="comma-separated thresholds for snapshots")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--format", choices=("csv", "json", "both"))
    return p


def _csv_floats(text: str, field: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(field, str(e)) from None


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Build the experiment config from flags, overriding any config file."""
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise ConfigError("$", "top level must be an object")
    else:
        doc = {"runs": [{}]}
    defaults = doc.setdefault("defaults", {})
    overrides: dict = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.rows is not None:
        overrides["rows"] = args.rows
    if args.cols is not None:
        overrides["cols"] = args.cols
    if args.distribution:
        overrides["distribution"] = {"kind": args.distribution}
    if args.seed is not None:
        overrides["topology_seed"] = args.seed
        overrides["data_seed"] = args.seed + 1000003
    if args.thresholds:
        overrides["thresholds"] = _csv_floats(args.thresholds, "thresholds")
    if args.stop_epsilon is not None:
        overrides["stop_epsilon"] = args.stop_epsilon
    if args.max_rounds is not None:
        overrides["max_rounds"] = args.max_rounds
    if args.freeze_at is not None:
        overrides["freeze_threshold"] = args.freeze_at
    defaults.update(overrides)
    for run_obj in doc.get("runs", []):
        if isinstance(run_obj, dict):
            for key, value in overrides.items():
                run_obj[key] = value
    if args.seeds is not None:
        doc["seeds"] = args.seeds
    if args.metrics_at:
        doc["metrics_at"] = _csv_floats(args.metrics_at, "metrics_at")
    if args.out:
        doc["out"] = args.out
    if args.format:
        doc["format"] = args.format
    return parse_config(json.dumps(doc))


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = config_from_args(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    report, paths = run_experiment(config)
    for path in paths:
        print(path)
    errors = [c for c in report["cells"] if c["error"]]
    for cell in errors:
        print(f"cell {cell['index']} ({cell['label']}) failed: {cell['error']}",
              file=sys.stderr)
    if errors and len(errors) == len(report["cells"]):
        return 2
    if errors:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
