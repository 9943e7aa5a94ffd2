import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossipavg import DistributionSpec, LatticeSpec, RunConfig
from gossipavg.cli import (
    ConfigError,
    ExperimentConfig,
    RunCell,
    config_from_args,
    emit_config,
    main,
    parse_config,
    run_experiment,
    _build_parser,
)

MINIMAL = '{"runs": [{"mode": "evolutionary", "rows": 32, "cols": 32}]}'


class TestParseConfig:
    def test_minimal_defaults(self):
        config = parse_config(MINIMAL)
        cell = config.cells[0]
        assert cell.run.thresholds == (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
        assert cell.run.stop_epsilon == 1e-12
        assert cell.run.max_rounds == 200_000
        assert cell.lattice == LatticeSpec(32, 32)
        assert cell.dist == DistributionSpec(kind="uniform", lo=0.0, hi=1.0)
        assert config.seeds == 1

    def test_ascending_thresholds_rejected_with_path(self):
        text = '{"runs": [{"rows": 8, "cols": 8, "thresholds": [1e-3, 1e-2, 1e-1]}]}'
        with pytest.raises(ConfigError, match=r"runs\[0\]"):
            parse_config(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config('{"runs": [{"rows": 8, "cols": 8, "wat": 1}]}')

    def test_frozen_needs_freeze_threshold(self):
        with pytest.raises(ConfigError, match="freeze_threshold"):
            parse_config('{"runs": [{"rows": 8, "cols": 8, "mode": "frozen"}]}')

    def test_json_error_has_location(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("{nope}")

    def test_empty_runs_rejected(self):
        with pytest.raises(ConfigError, match="runs"):
            parse_config('{"runs": []}')

    def test_defaults_apply_to_all_runs(self):
        text = json.dumps(
            {
                "defaults": {"max_rounds": 500, "thresholds": [0.1, 0.01]},
                "runs": [{"rows": 8, "cols": 8}, {"rows": 9, "cols": 9, "max_rounds": 9}],
            }
        )
        config = parse_config(text)
        assert config.cells[0].run.max_rounds == 500
        assert config.cells[1].run.max_rounds == 9
        assert config.cells[1].run.thresholds == (0.1, 0.01)

    def test_bad_format_rejected(self):
        with pytest.raises(ConfigError, match="format"):
            parse_config('{"runs": [{"rows": 8, "cols": 8}], "format": "yaml"}')


_dist_strategy = st.one_of(
    st.builds(
        DistributionSpec,
        kind=st.just("uniform"),
        lo=st.sampled_from([0.0, 0.5]),
        hi=st.sampled_from([1.0, 2.0]),
    ),
    st.builds(
        DistributionSpec,
        kind=st.just("quadrant"),
        quadrant_values=st.tuples(*[st.sampled_from([1.0, 2.0, 5.0])] * 4),
    ),
)

_cell_strategy = st.builds(
    RunCell,
    lattice=st.builds(LatticeSpec, rows=st.integers(3, 12), cols=st.integers(3, 12)),
    run=st.builds(
        RunConfig,
        mode=st.sampled_from(["evolutionary", "automaton"]),
        thresholds=st.sampled_from([(1e-1,), (1e-1, 1e-2), (1e-1, 1e-3, 1e-5)]),
        topology_seed=st.integers(0, 99),
        data_seed=st.integers(0, 99),
        max_rounds=st.integers(1, 1000),
    ),
    dist=_dist_strategy,
)


class TestRoundTrip:
    @given(
        cells=st.lists(_cell_strategy, min_size=1, max_size=3),
        seeds=st.integers(1, 5),
        metrics_at=st.sampled_from([(), (1e-1,), (1e-1, 1e-2)]),
    )
    @settings(max_examples=40, deadline=None)
    def test_emit_parse_round_trip(self, cells, seeds, metrics_at):
        config = ExperimentConfig(cells=cells, seeds=seeds, metrics_at=metrics_at)
        assert parse_config(emit_config(config)) == config

    def test_frozen_round_trip(self):
        cell = RunCell(
            LatticeSpec(8, 8),
            RunConfig(mode="frozen", freeze_threshold=1e-3),
            DistributionSpec(),
        )
        config = ExperimentConfig(cells=[cell], seeds=2)
        assert parse_config(emit_config(config)) == config


class TestFlagOverrides:
    def test_flags_build_single_cell(self):
        parser = _build_parser()
        args = parser.parse_args(
            ["--mode", "automaton", "--rows", "8", "--cols", "9", "--seed", "7",
             "--seeds", "3", "--thresholds", "0.1,0.01", "--max-rounds", "50",
             "--out", "outdir", "--format", "csv"]
        )
        config = config_from_args(args)
        cell = config.cells[0]
        assert cell.run.mode == "automaton"
        assert (cell.lattice.rows, cell.lattice.cols) == (8, 9)
        assert cell.run.topology_seed == 7
        assert cell.run.data_seed == 7 + 1000003
        assert cell.run.thresholds == (0.1, 0.01)
        assert cell.run.max_rounds == 50
        assert config.seeds == 3
        assert config.out_dir == "outdir"
        assert config.formats == ("csv",)

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(
            '{"runs": [{"rows": 32, "cols": 32}, {"rows": 64, "cols": 64}], "seeds": 5}'
        )
        parser = _build_parser()
        args = parser.parse_args(["--config", str(path), "--rows", "8", "--cols", "8"])
        config = config_from_args(args)
        assert all(c.lattice.rows == 8 for c in config.cells)
        assert config.seeds == 5

    def test_bad_flag_raises_config_error(self):
        parser = _build_parser()
        with pytest.raises(ConfigError):
            parser.parse_args(["--format", "xml"])


_REPORT_SCHEMA = {
    "type": "object",
    "required": ["config", "cells", "versions", "timings"],
    "properties": {
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "index", "label", "rows", "cols", "mode", "distribution",
                    "thresholds", "members", "aggregate", "metrics", "error",
                ],
                "properties": {
                    "members": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": [
                                "member", "topology_seed", "data_seed", "crossings",
                                "stop_reason", "rounds", "final_b", "final_mean",
                            ],
                        },
                    },
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "versions": {"type": "object"},
        "timings": {"type": "object", "required": ["cells", "total_s"]},
    },
}


def _tiny_config(out_dir, seeds=2):
    return ExperimentConfig(
        cells=[
            RunCell(
                LatticeSpec(8, 8),
                RunConfig(mode="evolutionary", thresholds=(1e-1, 1e-2), topology_seed=1,
                          data_seed=11),
                DistributionSpec(),
            ),
            RunCell(
                LatticeSpec(8, 8),
                RunConfig(mode="frozen", thresholds=(1e-1, 1e-2), freeze_threshold=1e-1,
                          topology_seed=2, data_seed=22),
                DistributionSpec(),
            ),
        ],
        seeds=seeds,
        out_dir=str(out_dir),
    )


class TestRunExperiment:
    def test_report_structure_and_schema(self, tmp_path):
        report, paths = run_experiment(_tiny_config(tmp_path))
        jsonschema.validate(report, _REPORT_SCHEMA)
        assert {p.name for p in paths} == {"report.json", "table_evolutionary.csv",
                                           "table_frozen.csv"}
        cell = report["cells"][0]
        assert len(cell["members"]) == 2
        assert cell["members"][1]["topology_seed"] == 2  # base + member index
        # aggregate median recomputation
        key = "0.01"
        values = [m["crossings"][key] for m in cell["members"]]
        assert cell["aggregate"]["median"][key] == float(np.median(values))
        assert cell["aggregate"]["n_crossed"][key] == 2

    def test_csv_column_count(self, tmp_path):
        _, paths = run_experiment(_tiny_config(tmp_path))
        table = next(p for p in paths if p.name == "table_evolutionary.csv")
        lines = table.read_text().splitlines()
        assert all(len(line.split(",")) == 2 + 1 for line in lines)  # thresholds + label

    def test_metrics_snapshot_attached(self, tmp_path):
        config = _tiny_config(tmp_path, seeds=1)
        config.metrics_at = (1e-1,)
        report, _ = run_experiment(config, emit=False)
        metrics = report["cells"][0]["metrics"]
        assert metrics and metrics[0]["at_threshold"] == 1e-1
        assert metrics[0]["diameter"] >= 1
        assert report["cells"][1]["metrics"] == []  # frozen cells skipped

    def test_snapshot_export(self, tmp_path):
        from gossipavg import load_edge_list, validate

        config = _tiny_config(tmp_path, seeds=1)
        config.metrics_at = (1e-1,)
        config.save_snapshots = True
        report, _ = run_experiment(config)
        name = report["cells"][0]["metrics"][0]["snapshot"]
        topo = load_edge_list(tmp_path / name)
        assert validate(topo) == []
        assert topo.n_nodes == 64

    def test_cell_failure_isolated(self, tmp_path):
        config = _tiny_config(tmp_path)
        # mean ~5e-301 underflows the ratio: this cell fails, others go on
        config.cells[0].dist = DistributionSpec(lo=0.0, hi=1e-300)
        report, paths = run_experiment(config)
        assert report["cells"][0]["error"] is not None
        assert "DegenerateMean" in report["cells"][0]["error"]
        assert report["cells"][1]["error"] is None
        table = next(p for p in paths if p.name == "table_evolutionary.csv")
        assert table.read_text().splitlines() == ["size,b<0.1,b<0.01"]  # header only

    def test_table_row_matches_known_medians(self, tmp_path):
        # end to end through the orchestrator: the emitted evolutionary
        # row for 32x32 must reproduce the known ensemble medians
        config = ExperimentConfig(
            cells=[RunCell(LatticeSpec(32, 32),
                           RunConfig(mode="evolutionary", topology_seed=0, data_seed=1000),
                           DistributionSpec())],
            seeds=5,
            out_dir=str(tmp_path),
        )
        _, paths = run_experiment(config)
        table = next(p for p in paths if p.name == "table_evolutionary.csv")
        header, row = table.read_text().splitlines()
        assert header == "size,b<0.1,b<0.01,b<0.001,b<0.0001,b<1e-05"
        values = row.split(",")
        assert values[0] == "32x32"
        assert [float(v) for v in values[1:]] == [3, 6, 9, 11, 13]

    def test_determinism_byte_identical(self, tmp_path):
        # same config run twice in place: artifacts must not change
        out = tmp_path / "r"
        _, paths = run_experiment(_tiny_config(out))
        first = {p.name: p.read_bytes() for p in paths}
        run_experiment(_tiny_config(out))
        for name in ("table_evolutionary.csv", "table_frozen.csv"):
            assert (out / name).read_bytes() == first[name]
        r1 = json.loads(first["report.json"].decode())
        r2 = json.loads((out / "report.json").read_text())
        r1.pop("timings")
        r2.pop("timings")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


class TestMain:
    def test_success_exit_zero(self, tmp_path, capsys):
        code = main(["--rows", "8", "--cols", "8", "--seed", "1",
                     "--thresholds", "0.1,0.01", "--out", str(tmp_path / "r")])
        assert code == 0
        assert (tmp_path / "r" / "report.json").exists()
        assert "report.json" in capsys.readouterr().out

    def test_config_error_exit_one(self, capsys):
        assert main(["--thresholds", "0.01,0.1", "--rows", "8", "--cols", "8"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_one(self, capsys):
        assert main(["--config", "/nonexistent/conf.json"]) == 1

    def test_all_cells_failed_exit_two(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({
            "runs": [{"rows": 8, "cols": 8,
                      "distribution": {"kind": "uniform", "lo": 0.0, "hi": 1e-300}}],
            "out": str(tmp_path / "r"),
        }))
        assert main(["--config", str(path)]) == 2

    def test_partial_failure_exit_three(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({
            "runs": [
                {"rows": 8, "cols": 8, "thresholds": [0.1]},
                {"rows": 8, "cols": 8, "thresholds": [0.1],
                 "distribution": {"kind": "uniform", "lo": 0.0, "hi": 1e-300}},
            ],
            "out": str(tmp_path / "r"),
        }))
        assert main(["--config", str(path)]) == 3

    def test_frozen_via_flags(self, tmp_path):
        code = main(["--rows", "8", "--cols", "8", "--mode", "frozen",
                     "--freeze-at", "0.5", "--thresholds", "0.1",
                     "--out", str(tmp_path / "r"), "--format", "json"])
        assert code == 0
        report = json.loads((tmp_path / "r" / "report.json").read_text())
        assert report["cells"][0]["mode"] == "frozen"
