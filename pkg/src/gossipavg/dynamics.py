"""State evolution and convergence measurement.

Each round every node synchronously replaces its value with the mean of
its own value and its q in-neighbors' values. Convergence is tracked by
the population coefficient of variation (standard deviation over mean)
of the node values, and a run records the first round at which that
ratio drops below each configured threshold.

Regimes:
  * ``evolutionary`` - the topology rewires as the computation runs: a
    full neighbor-exchange pass follows every averaging step, so each
    rewiring pass precedes the next round's averaging (round 1 averages
    on the pristine topology). A run stopped at round t has absorbed t
    rewiring passes.
  * ``frozen`` - a fixed topology taken from a snapshot of an
    evolutionary run (see :func:`frozen_pipeline`).
  * ``automaton`` - the fixed initial lattice, never rewired.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .datagen import DistributionSpec, generate
from .graph import LatticeSpec, Topology, build_moore_lattice, rewire_round

MODES = ("evolutionary", "frozen", "automaton")
DEFAULT_THRESHOLDS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)

STOP_EPSILON = "epsilon"
STOP_MAX_ROUNDS = "max_rounds"
STOP_THRESHOLDS_MET = "thresholds_met"

_MEAN_FLOOR = 1e-30


class DegenerateMeanError(ValueError):
    """The state mean is too close to zero for the convergence ratio."""


class PipelineError(RuntimeError):
    """The evolution phase of a frozen-regime run did not converge."""


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run besides the topology and data."""

    mode: str = "evolutionary"
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    stop_epsilon: float = 1e-12
    max_rounds: int = 200_000
    topology_seed: int = 0
    data_seed: int = 0
    freeze_threshold: float | None = None  # frozen mode only
    fresh_phase2_data: bool = True  # frozen mode: re-draw data after the freeze

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        thr = tuple(float(t) for t in self.thresholds)
        if not thr:
            raise ValueError("thresholds must be non-empty")
        if any(t <= 0 for t in thr):
            raise ValueError("thresholds must be positive")
        if any(b >= a for a, b in zip(thr, thr[1:])):
            raise ValueError(f"thresholds must be strictly decreasing, got {thr}")
        object.__setattr__(self, "thresholds", thr)
        if self.stop_epsilon <= 0:
            raise ValueError("stop_epsilon must be positive")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be non-negative")


@dataclass
class ConvergenceTrace:
    """Per-round convergence ratios plus first-crossing bookkeeping.

    b_per_round[0] is the ratio of the initial data; entry t is the ratio
    after round t. crossings maps each threshold to the first round index
    whose ratio fell below it (absent if that never happened).
    """

    b_per_round: list[float]
    crossings: dict[float, int]
    stop_reason: str

    @property
    def rounds(self) -> int:
        return len(self.b_per_round) - 1


def convergence_b(values: np.ndarray) -> float:
    """Population coefficient of variation: std (divide by N) over mean.

    Zero for a constant nonzero vector. Raises DegenerateMeanError when
    |mean| < 1e-30; callers should use positive-valued data.
    """
    values = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(values))
    if abs(mean) < _MEAN_FLOOR:
        raise DegenerateMeanError(
            f"state mean {mean} is too close to zero, ratio undefined"
        )
    return float(np.std(values) / mean)


def average_step(topology: Topology, values: np.ndarray) -> np.ndarray:
    """One synchronous averaging round: value(i) <- mean over in(i) and i.

    All outputs are computed from the pre-step state. Per node, the sum
    runs over the in-list in slot order with the node's own value added
    last, so results are bit-reproducible regardless of parallelism. The
    update matrix is doubly stochastic (in-degree = out-degree = q), so
    the global mean is conserved up to rounding.
    """
    values = np.asarray(values, dtype=np.float64)
    in_lists = topology.in_lists
    n, q = in_lists.shape
    if values.shape != (n,):
        raise ValueError(f"state length {values.shape} != n_nodes {n}")
    acc = values[in_lists[:, 0]].copy()
    for k in range(1, q):
        acc += values[in_lists[:, k]]
    acc += values
    acc /= q + 1
    return acc


def _note_crossings(
    crossings: dict[float, int], thresholds: tuple[float, ...], b: float, t: int
) -> None:
    for thr in thresholds:
        if thr not in crossings and b < thr:
            crossings[thr] = t


def run(
    config: RunConfig, topology: Topology, init: np.ndarray
) -> tuple[ConvergenceTrace, Topology, np.ndarray]:
    """Run one convergence experiment; returns (trace, topology, state).

    In evolutionary mode the passed topology is rewired in place and the
    pass of the stopping round is included in the returned topology; in
    the other modes it is never touched. The rewiring generator is seeded
    from config.topology_seed, so (topology_seed, data_seed, config)
    fixes the whole trace bit-exactly.

    Stops as soon as all thresholds have been crossed, else when the
    ratio changes by less than stop_epsilon between successive rounds,
    else at max_rounds; stop_reason records which (in that priority).
    """
    values = np.array(init, dtype=np.float64)
    rng = np.random.default_rng(config.topology_seed)
    b = convergence_b(values)
    b_per_round = [b]
    crossings: dict[float, int] = {}
    _note_crossings(crossings, config.thresholds, b, 0)
    stop = STOP_THRESHOLDS_MET if len(crossings) == len(config.thresholds) else None
    t = 0
    while stop is None and t < config.max_rounds:
        t += 1
        values = average_step(topology, values)
        if config.mode == "evolutionary":
            rewire_round(topology, rng, round_index=t)
        b = convergence_b(values)
        b_per_round.append(b)
        _note_crossings(crossings, config.thresholds, b, t)
        if len(crossings) == len(config.thresholds):
            stop = STOP_THRESHOLDS_MET
        elif abs(b - b_per_round[-2]) < config.stop_epsilon:
            stop = STOP_EPSILON
    if stop is None:
        stop = STOP_MAX_ROUNDS
    return ConvergenceTrace(b_per_round, crossings, stop), topology, values


def run_frozen(
    config: RunConfig, spec: LatticeSpec, dist: DistributionSpec
) -> tuple[ConvergenceTrace, Topology, np.ndarray]:
    """Evolve first, then measure on the frozen result.

    Phase 1 runs the evolutionary regime from the lattice until the
    convergence ratio drops below config.freeze_threshold; the topology
    reached at that point is frozen. Phase 2 re-initializes the node
    values (fresh data seed = data_seed + 1 unless fresh_phase2_data is
    False) and measures convergence on the frozen topology. Returns the
    phase-2 trace, the frozen topology, and the final state.
    """
    if config.mode != "frozen":
        raise ValueError(f"frozen_pipeline needs mode='frozen', got {config.mode!r}")
    freeze = config.freeze_threshold
    if freeze is None or freeze <= 0:
        raise ValueError(f"freeze_threshold must be positive, got {freeze!r}")
    phase1 = replace(config, mode="evolutionary", thresholds=(freeze,), freeze_threshold=None)
    topology = build_moore_lattice(spec)
    init = generate(dist, spec.rows, spec.cols, np.random.default_rng(config.data_seed))
    trace1, topology, _ = run(phase1, topology, init)
    if trace1.stop_reason != STOP_THRESHOLDS_MET:
        raise PipelineError(
            f"evolution phase stopped ({trace1.stop_reason}) after "
            f"{trace1.rounds} rounds without reaching ratio < {freeze}"
        )
    seed2 = config.data_seed + 1 if config.fresh_phase2_data else config.data_seed
    init2 = generate(dist, spec.rows, spec.cols, np.random.default_rng(seed2))
    trace2, topology, values = run(replace(config, data_seed=seed2), topology, init2)
    return trace2, topology, values


def frozen_pipeline(
    config: RunConfig, spec: LatticeSpec, dist: DistributionSpec
) -> ConvergenceTrace:
    """Trace-only wrapper around :func:`run_frozen`."""
    return run_frozen(config, spec, dist)[0]


def threshold_crossings(
    trace: ConvergenceTrace, thresholds: tuple[float, ...]
) -> dict[float, int]:
    """Recompute first-crossing rounds from the recorded ratio sequence.

    Pure function of trace.b_per_round; agrees with the map maintained
    during the run for the thresholds the run tracked.
    """
    if not trace.b_per_round:
        raise ValueError("trace is empty")
    out: dict[float, int] = {}
    for t, b in enumerate(trace.b_per_round):
        _note_crossings(out, tuple(thresholds), b, t)
        if len(out) == len(thresholds):
            break
    return out


# --- trace export ----------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6e}"


def trace_to_csv(trace: ConvergenceTrace, thresholds: tuple[float, ...] | None = None) -> str:
    """Render a trace as CSV: a round,b table followed by a crossings block.

    Ratios are written in scientific notation with 6 significant digits.
    Thresholds that never crossed get an empty round field.
    """
    if thresholds is None:
        thresholds = tuple(sorted(trace.crossings, reverse=True))
    lines = ["round,b"]
    lines.extend(f"{t},{_fmt(b)}" for t, b in enumerate(trace.b_per_round))
    lines.append("threshold,crossing_round")
    for thr in thresholds:
        t = trace.crossings.get(thr)
        lines.append(f"{_fmt(thr)},{'' if t is None else t}")
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: ConvergenceTrace, path, thresholds=None) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(trace_to_csv(trace, thresholds))


def trace_report(
    trace: ConvergenceTrace,
    config: RunConfig,
    final_mean: float,
    wall_time_s: float | None = None,
) -> dict:
    """JSON-ready run report: config echo, crossings, stop reason, final
    mean, with wall time kept in a separate timings section."""
    return {
        "config": asdict(config),
        "crossings": {f"{thr:.6g}": t for thr, t in sorted(trace.crossings.items(), reverse=True)},
        "stop_reason": trace.stop_reason,
        "rounds": trace.rounds,
        "final_b": trace.b_per_round[-1],
        "final_mean": final_mean,
        "timings": {"wall_time_s": wall_time_s},
    }


def write_trace_json(
    trace: ConvergenceTrace,
    config: RunConfig,
    final_mean: float,
    path,
    wall_time_s: float | None = None,
) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        json.dump(trace_report(trace, config, final_mean, wall_time_s), f, indent=2)
        f.write("\n")
