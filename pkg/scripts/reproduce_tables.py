#!/usr/bin/env python3
"""Regenerate the convergence tables for the three regimes.

One experiment per table, each written to its own directory under --out
(CSV table plus a full JSON bundle) and echoed to stdout:

  evolutionary_uniform   rewiring network, uniform random data
  fixed_networks         networks frozen after evolving to 1e-1 / 1e-5
  automaton              the static lattice itself
  evolutionary_quadrant  rewiring network, four-block data

The default 11-seed ensemble takes a few minutes. --quick drops to 3
seeds; --large adds the 1000x1000 rows to the evolutionary tables (the
automaton at that size needs hours and is left to explicit --automaton-sizes).
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gossipavg import DistributionSpec, LatticeSpec, RunConfig
from gossipavg.cli import ExperimentConfig, RunCell, run_experiment

UNIFORM = DistributionSpec()
QUADRANT = DistributionSpec(kind="quadrant")


def _cell(dim, mode, dist=UNIFORM, freeze=None, seed_base=0):
    return RunCell(
        lattice=LatticeSpec(dim, dim),
        run=RunConfig(
            mode=mode,
            freeze_threshold=freeze,
            topology_seed=seed_base,
            data_seed=seed_base + 1000,
        ),
        dist=dist,
    )


def _tables(args):
    evo_sizes = [32, 100, 320] + ([1000] if args.large else [])
    yield "evolutionary_uniform", [_cell(d, "evolutionary") for d in evo_sizes]
    yield "fixed_networks", [
        _cell(d, "frozen", freeze=f) for f in (1e-1, 1e-5) for d in (32, 320)
    ]
    yield "automaton", [_cell(d, "automaton") for d in args.automaton_sizes]
    yield "evolutionary_quadrant", [
        _cell(d, "evolutionary", dist=QUADRANT) for d in evo_sizes
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", default="results", help="output root directory")
    parser.add_argument("--seeds", type=int, default=11, help="ensemble size")
    parser.add_argument("--quick", action="store_true", help="3-seed ensembles")
    parser.add_argument("--large", action="store_true",
                        help="include the 1000x1000 evolutionary rows")
    parser.add_argument("--automaton-sizes", type=int, nargs="+", default=[32, 100],
                        help="lattice sides for the automaton table "
                             "(320 takes minutes, 1000 hours)")
    args = parser.parse_args(argv)
    seeds = 3 if args.quick else args.seeds

    for name, cells in _tables(args):
        config = ExperimentConfig(
            cells=cells, seeds=seeds, out_dir=str(Path(args.out) / name)
        )
        print(f"== {name} ({seeds} seeds) ==")
        report, paths = run_experiment(config)
        for cell in report["cells"]:
            if cell["error"]:
                print(f"  {cell['label']}: FAILED {cell['error']}")
        for path in paths:
            if path.suffix == ".csv":
                print(path.read_text(), end="")
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
